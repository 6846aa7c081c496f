"""Per-variable bag-of-words linear classification.

One model per boolean variable: unigram counts (boilerplate excluded), a
linear max-margin fit, and a logistic calibration over the margin that
turns scores into probabilities. Predictions fall back to Unknown when the
model has no examples, has seen only one class, or lands too close to 0.5.

Training is deterministic: dual coordinate descent over examples in a
fixed order, no randomized permutations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Document
from .errors import EmptyModel, OverlapError


class PredictedClass(Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Hyperparams:
    c: float = 1.0
    tau: float = 0.1
    max_epochs: int = 1000
    tol: float = 1e-6
    calibration_min_examples: int = 10


@dataclass(frozen=True)
class FeatureVector:
    counts: Mapping[int, int]


@dataclass(frozen=True)
class TermWeight:
    term: str
    weight: float

    @property
    def polarity(self) -> bool:
        return self.weight > 0


@dataclass(frozen=True)
class Prediction:
    doc_id: str
    variable: str
    cls: PredictedClass
    probability: float
    visited: bool = False


@dataclass(frozen=True)
class VariableModel:
    variable: str
    vocabulary: Mapping[str, int]  # dense indices 0..V-1
    weights: tuple[float, ...]
    bias: float
    calibration: tuple[float, float]  # p(True) = sigmoid(a * margin + b)
    trained_counts: tuple[int, int]  # (n_true, n_false)
    trained_doc_ids: frozenset[str] = frozenset()
    excluded_terms: frozenset[str] = frozenset()
    hyperparams: Hyperparams = field(default_factory=Hyperparams)

    @property
    def is_null(self) -> bool:
        return sum(self.trained_counts) == 0

    @property
    def single_class(self) -> bool:
        n_true, n_false = self.trained_counts
        return (n_true == 0) != (n_false == 0)

    def margin(self, fv: FeatureVector) -> float:
        return sum(self.weights[i] * c for i, c in fv.counts.items()) + self.bias

    def term_weight(self, term: str) -> float:
        idx = self.vocabulary.get(term)
        return 0.0 if idx is None else self.weights[idx]


def null_model(variable: str, hyperparams: Hyperparams = Hyperparams()) -> VariableModel:
    return VariableModel(
        variable=variable,
        vocabulary={},
        weights=(),
        bias=0.0,
        calibration=(1.0, 0.0),
        trained_counts=(0, 0),
        hyperparams=hyperparams,
    )


def build_vocabulary(
    documents: Iterable[Document], excluded_terms: frozenset[str] = frozenset()
) -> dict[str, int]:
    """Dense term index over non-boilerplate tokens, lexicographic order."""
    terms = set()
    for doc in documents:
        for _, token in doc.iter_tokens():
            terms.add(token.norm)
    terms -= excluded_terms
    return {term: i for i, term in enumerate(sorted(terms))}


def extract_features(document: Document, vocabulary: Mapping[str, int]) -> FeatureVector:
    """Counts of in-vocabulary tokens outside boilerplate. Order-insensitive."""
    counts: dict[int, int] = {}
    for _, token in document.iter_tokens():
        idx = vocabulary.get(token.norm)
        if idx is not None:
            counts[idx] = counts.get(idx, 0) + 1
    return FeatureVector(counts)


def _solve_hinge(X: np.ndarray, y: np.ndarray, c: float, max_epochs: int, tol: float) -> np.ndarray:
    """L2-regularized L1-loss SVM by dual coordinate descent.

    X already carries the bias column. Examples are visited in index order
    every epoch, so the result is deterministic for a given input order.
    """
    n = X.shape[0]
    alpha = np.zeros(n)
    w = np.zeros(X.shape[1])
    q_diag = np.einsum("ij,ij->i", X, X)
    for _ in range(max_epochs):
        max_violation = 0.0
        for i in range(n):
            g = y[i] * float(X[i] @ w) - 1.0
            a = alpha[i]
            if a <= 0.0:
                pg = min(g, 0.0)
            elif a >= c:
                pg = max(g, 0.0)
            else:
                pg = g
            if abs(pg) > max_violation:
                max_violation = abs(pg)
            if pg != 0.0:
                new_a = min(max(a - g / q_diag[i], 0.0), c)
                if new_a != a:
                    w += (new_a - a) * y[i] * X[i]
                    alpha[i] = new_a
        if max_violation < tol:
            break
    return w


def _fit_calibration(margins: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Platt-style logistic fit p = sigmoid(a*m + b) with smoothed targets.

    Newton iterations on the two-parameter log-loss; the smoothed targets
    keep the optimum finite even on separable data.
    """
    n_pos = int(np.sum(y > 0))
    n_neg = len(y) - n_pos
    t_pos = (n_pos + 1.0) / (n_pos + 2.0)
    t_neg = 1.0 / (n_neg + 2.0)
    t = np.where(y > 0, t_pos, t_neg)
    a, b = 1.0, 0.0
    for _ in range(100):
        z = a * margins + b
        p = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
        d = p - t
        g_a = float(np.dot(d, margins))
        g_b = float(np.sum(d))
        s = p * (1.0 - p)
        h_aa = float(np.dot(s, margins * margins)) + 1e-9
        h_ab = float(np.dot(s, margins))
        h_bb = float(np.sum(s)) + 1e-9
        det = h_aa * h_bb - h_ab * h_ab
        if abs(det) < 1e-18:
            break
        da = (g_a * h_bb - g_b * h_ab) / det
        db = (g_b * h_aa - g_a * h_ab) / det
        a -= da
        b -= db
        if abs(da) < 1e-10 and abs(db) < 1e-10:
            break
    if not (math.isfinite(a) and math.isfinite(b)):
        return 1.0, 0.0
    return a, b


def train(
    examples: Sequence[tuple[FeatureVector, bool]],
    variable: str,
    vocabulary: Mapping[str, int],
    hyperparams: Hyperparams = Hyperparams(),
    trained_doc_ids: frozenset[str] = frozenset(),
    excluded_terms: frozenset[str] = frozenset(),
) -> VariableModel:
    """Fit a model from indexed examples.

    With zero examples the null model is returned. With a single class the
    weights are fit anyway but the model reports single_class, which makes
    every prediction Unknown until both classes have been seen.
    """
    n_true = sum(1 for _, label in examples if label)
    n_false = len(examples) - n_true
    if not examples:
        return null_model(variable, hyperparams)

    v = len(vocabulary)
    X = np.zeros((len(examples), v + 1))
    y = np.zeros(len(examples))
    for row, (fv, label) in enumerate(examples):
        for idx, count in fv.counts.items():
            X[row, idx] = float(count)
        X[row, v] = 1.0  # bias column
        y[row] = 1.0 if label else -1.0

    w = _solve_hinge(X, y, hyperparams.c, hyperparams.max_epochs, hyperparams.tol)
    margins = X @ w
    if n_true == 0 or n_false == 0 or len(examples) < hyperparams.calibration_min_examples:
        calibration = (1.0, 0.0)
    else:
        calibration = _fit_calibration(margins, y)

    return VariableModel(
        variable=variable,
        vocabulary=dict(vocabulary),
        weights=tuple(float(x) for x in w[:v]),
        bias=float(w[v]),
        calibration=calibration,
        trained_counts=(n_true, n_false),
        trained_doc_ids=trained_doc_ids,
        excluded_terms=excluded_terms,
        hyperparams=hyperparams,
    )


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-min(z, 500.0)))
    e = math.exp(max(z, -500.0))
    return e / (1.0 + e)


_P_EPS = 1e-9  # keep probabilities strictly inside (0, 1)


def predict(model: VariableModel, doc_id: str, fv: FeatureVector) -> Prediction:
    if model.is_null or model.single_class:
        return Prediction(doc_id, model.variable, PredictedClass.UNKNOWN, 0.5)
    a, b = model.calibration
    p = _sigmoid(a * model.margin(fv) + b)
    p = min(max(p, _P_EPS), 1.0 - _P_EPS)
    if abs(p - 0.5) < model.hyperparams.tau:
        cls = PredictedClass.UNKNOWN
    elif p >= 0.5:
        cls = PredictedClass.TRUE
    else:
        cls = PredictedClass.FALSE
    return Prediction(doc_id, model.variable, cls, p)


def top_terms(model: VariableModel, k: int) -> tuple[list[TermWeight], list[TermWeight]]:
    """k strongest positive and k strongest negative terms; zero weights excluded."""
    if model.is_null:
        raise EmptyModel(f"no trained model for variable {model.variable!r}")
    terms = sorted(model.vocabulary, key=lambda t: model.vocabulary[t])
    positive = [TermWeight(t, model.weights[model.vocabulary[t]]) for t in terms]
    pos = [tw for tw in positive if tw.weight > 0]
    neg = [tw for tw in positive if tw.weight < 0]
    key = lambda tw: (-abs(tw.weight), tw.term)
    return sorted(pos, key=key)[:k], sorted(neg, key=key)[:k]


def document_indicators(
    model: VariableModel, document: Document
) -> list[tuple[TermWeight, list[tuple[str, int, int]]]]:
    """Nonzero-weight terms present in the document (outside boilerplate),
    each with every occurrence span (report_id, start, end)."""
    occurrences: dict[str, list[tuple[str, int, int]]] = {}
    for sentence, token in document.iter_tokens():
        if model.term_weight(token.norm) != 0.0:
            occurrences.setdefault(token.norm, []).append(
                (sentence.report_id, token.start, token.end)
            )
    result = [
        (TermWeight(term, model.term_weight(term)), spans)
        for term, spans in occurrences.items()
    ]
    result.sort(key=lambda pair: (-abs(pair[0].weight), pair[0].term))
    return result


def variable_distribution(
    predictions: Mapping[tuple[str, str], Prediction],
    variable: str,
    doc_ids: Sequence[str],
) -> tuple[int, int, int]:
    """(n_true, n_false, n_unknown) over the given documents."""
    n_true = n_false = n_unknown = 0
    for doc_id in doc_ids:
        cls = predictions[(doc_id, variable)].cls
        if cls is PredictedClass.TRUE:
            n_true += 1
        elif cls is PredictedClass.FALSE:
            n_false += 1
        else:
            n_unknown += 1
    return n_true, n_false, n_unknown


@dataclass(frozen=True)
class EvalMetrics:
    variable: str
    n: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    n_unknown: int
    # (gold, predicted) -> count; predicted includes "unknown"
    confusion: Mapping[tuple[str, str], int]

    def to_dict(self) -> dict:
        return {
            "variable": self.variable,
            "n": self.n,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "unknown": self.n_unknown,
            "confusion": {f"{g}/{p}": c for (g, p), c in sorted(self.confusion.items())},
        }


def evaluate(
    model: VariableModel,
    labeled: Sequence[tuple[str, FeatureVector, bool]],
) -> EvalMetrics:
    """Held-out metrics. Unknown predictions always count as errors and are
    reported separately. Raises OverlapError if any doc was trained on."""
    overlap = {doc_id for doc_id, _, _ in labeled} & set(model.trained_doc_ids)
    if overlap:
        raise OverlapError(
            f"held-out documents were used in training: {sorted(overlap)[:5]}"
        )
    confusion: dict[tuple[str, str], int] = {}
    tp = fp = fn = correct = unknown = 0
    for doc_id, fv, gold in labeled:
        pred = predict(model, doc_id, fv)
        gold_name = "true" if gold else "false"
        key = (gold_name, pred.cls.value)
        confusion[key] = confusion.get(key, 0) + 1
        if pred.cls is PredictedClass.UNKNOWN:
            unknown += 1
            if gold:
                fn += 1
            continue
        predicted_true = pred.cls is PredictedClass.TRUE
        if predicted_true == gold:
            correct += 1
        if predicted_true and gold:
            tp += 1
        elif predicted_true and not gold:
            fp += 1
        elif not predicted_true and gold:
            fn += 1
    n = len(labeled)
    accuracy = correct / n if n else 0.0
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return EvalMetrics(
        variable=model.variable,
        n=n,
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        n_unknown=unknown,
        confusion=confusion,
    )
