"""Engine: models, prediction table, and the retrain cycle.

Owns one model and one prediction column per variable, a feedback ledger,
and the seed labels. Retraining compiles the ledger, refits only the
variables whose training inputs changed, swaps the full prediction table
atomically, and reports exactly the cells whose class changed.

Reads always see a complete snapshot: the table reference is replaced in
one assignment, never mutated in place. At most one retrain runs at a
time; a second request is rejected with Busy.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import Corpus, load_seed_labels
from .errors import Busy, OverlapError, UnknownVariable
from .feedback import CompiledFeedback, FeedbackLedger
from .learner import (
    EvalMetrics,
    FeatureVector,
    Hyperparams,
    PredictedClass,
    Prediction,
    VariableModel,
    build_vocabulary,
    evaluate,
    extract_features,
    null_model,
    predict,
    train,
)

MODEL_SNAPSHOT_SCHEMA = 1


@dataclass(frozen=True)
class EngineConfig:
    tau: float = 0.1
    c: float = 1.0
    span_emphasis: bool = False
    calibration_min_examples: int = 10

    def hyperparams(self) -> Hyperparams:
        return Hyperparams(
            c=self.c,
            tau=self.tau,
            calibration_min_examples=self.calibration_min_examples,
        )


@dataclass(frozen=True)
class DiffCell:
    doc_id: str
    variable: str
    old_class: PredictedClass
    new_class: PredictedClass
    old_probability: float
    new_probability: float

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "variable": self.variable,
            "old_class": self.old_class.value,
            "new_class": self.new_class.value,
            "old_probability": self.old_probability,
            "new_probability": self.new_probability,
        }


@dataclass(frozen=True)
class DiffReport:
    changes: tuple[DiffCell, ...]
    retrained_at: float
    feedback_count: int

    @property
    def changed_cells(self) -> frozenset[tuple[str, str]]:
        return frozenset((c.doc_id, c.variable) for c in self.changes)

    def to_dict(self) -> dict:
        return {
            "changes": [c.to_dict() for c in self.changes],
            "retrained_at": self.retrained_at,
            "feedback_count": self.feedback_count,
        }


def diff_tables(
    old: Mapping[tuple[str, str], Prediction],
    new: Mapping[tuple[str, str], Prediction],
    feedback_count: int,
    retrained_at: float | None = None,
) -> DiffReport:
    """Cells whose class changed between two full prediction tables."""
    changes = []
    for key in sorted(new):
        before = old[key]
        after = new[key]
        if before.cls is not after.cls:
            changes.append(
                DiffCell(
                    doc_id=key[0],
                    variable=key[1],
                    old_class=before.cls,
                    new_class=after.cls,
                    old_probability=before.probability,
                    new_probability=after.probability,
                )
            )
    return DiffReport(
        changes=tuple(changes),
        retrained_at=time.time() if retrained_at is None else retrained_at,
        feedback_count=feedback_count,
    )


def _training_signature(
    labels: Mapping[str, bool], exclusions: frozenset[str], emphases: tuple
) -> tuple:
    return (tuple(sorted(labels.items())), tuple(sorted(exclusions)), emphases)


class Engine:
    def __init__(
        self,
        corpus: Corpus,
        seed_labels: Mapping[tuple[str, str], bool],
        config: EngineConfig = EngineConfig(),
        data_dir: str | Path | None = None,
    ):
        self.corpus = corpus
        self.config = config
        self.seed_labels = dict(seed_labels)
        self.data_dir = None if data_dir is None else Path(data_dir)
        if self.data_dir is not None:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            ledger_path = self.data_dir / "ledger.jsonl"
            self.ledger = FeedbackLedger.load(corpus, ledger_path)
        else:
            self.ledger = FeedbackLedger(corpus)
        self.models: dict[str, VariableModel] = {}
        self.predictions: dict[tuple[str, str], Prediction] = {}
        self.last_diff: DiffReport | None = None
        self._signatures: dict[str, tuple] = {}
        self._write_lock = threading.RLock()
        self._retrain_lock = threading.Lock()

        snapshot = None if self.data_dir is None else self.data_dir / "models.json"
        if snapshot is not None and snapshot.exists():
            self._restore(snapshot)
        else:
            self._initial_train()
            self._write_snapshot()

    # -- training ------------------------------------------------------

    def _variable_inputs(
        self, compiled: CompiledFeedback | None
    ) -> dict[str, tuple[dict[str, bool], frozenset[str], tuple]]:
        """Per-variable (labels, exclusions, emphases) from seed + feedback."""
        label_map = (
            dict(self.seed_labels) if compiled is None else dict(compiled.labels)
        )
        per_var: dict[str, dict[str, bool]] = {v: {} for v in self.corpus.variables}
        for (doc_id, variable), value in label_map.items():
            per_var[variable][doc_id] = value
        result = {}
        for variable in self.corpus.variables:
            exclusions = (
                frozenset()
                if compiled is None
                else compiled.exclusions.get(variable, frozenset())
            )
            emphases: tuple = ()
            if compiled is not None and self.config.span_emphasis:
                emphases = tuple(
                    sorted(
                        (doc_id, terms)
                        for (doc_id, v), terms in compiled.emphases.items()
                        if v == variable and doc_id in per_var[variable]
                    )
                )
            result[variable] = (per_var[variable], exclusions, emphases)
        return result

    def _train_variable(
        self,
        variable: str,
        labels: Mapping[str, bool],
        exclusions: frozenset[str],
        emphases: tuple,
    ) -> VariableModel:
        if not labels:
            return null_model(variable, self.config.hyperparams())
        doc_ids = sorted(labels)
        documents = [self.corpus.document(d) for d in doc_ids]
        vocabulary = build_vocabulary(documents, exclusions)
        emphasis_map = dict(emphases)
        examples = []
        for doc_id, document in zip(doc_ids, documents):
            fv = extract_features(document, vocabulary)
            extra = emphasis_map.get(doc_id)
            if extra:
                counts = dict(fv.counts)
                for term in extra:
                    idx = vocabulary.get(term)
                    if idx is not None:
                        counts[idx] = counts.get(idx, 0) + 1
                fv = FeatureVector(counts)
            examples.append((fv, labels[doc_id]))
        return train(
            examples,
            variable,
            vocabulary,
            self.config.hyperparams(),
            trained_doc_ids=frozenset(doc_ids),
            excluded_terms=exclusions,
        )

    def _predict_column(self, model: VariableModel) -> dict[tuple[str, str], Prediction]:
        column = {}
        for document in self.corpus.documents:
            fv = extract_features(document, model.vocabulary)
            column[(document.doc_id, model.variable)] = predict(model, document.doc_id, fv)
        return column

    def _initial_train(self) -> None:
        inputs = self._variable_inputs(None)
        table: dict[tuple[str, str], Prediction] = {}
        for variable, (labels, exclusions, emphases) in inputs.items():
            model = self._train_variable(variable, labels, exclusions, emphases)
            self.models[variable] = model
            self._signatures[variable] = _training_signature(labels, exclusions, emphases)
            table.update(self._predict_column(model))
        self.predictions = table

    def retrain(self) -> DiffReport:
        """Compile feedback, refit changed variables, swap and diff the table."""
        if not self._retrain_lock.acquire(blocking=False):
            raise Busy("a retrain is already in progress")
        try:
            with self._write_lock:
                compiled = self.ledger.compile(self.seed_labels)
            inputs = self._variable_inputs(compiled)
            new_models = dict(self.models)
            new_signatures = dict(self._signatures)
            new_table = dict(self.predictions)
            for variable, (labels, exclusions, emphases) in inputs.items():
                signature = _training_signature(labels, exclusions, emphases)
                if signature == self._signatures.get(variable):
                    continue
                model = self._train_variable(variable, labels, exclusions, emphases)
                new_models[variable] = model
                new_signatures[variable] = signature
                new_table.update(self._predict_column(model))
            diff = diff_tables(self.predictions, new_table, compiled.pending_count)
            with self._write_lock:
                self.ledger.finalize_retrain(compiled)
                self.models = new_models
                self._signatures = new_signatures
                self.predictions = new_table
                self.last_diff = diff
                self._write_snapshot()
            return diff
        finally:
            self._retrain_lock.release()

    # -- queries -------------------------------------------------------

    def prediction(self, doc_id: str, variable: str) -> Prediction:
        return self.predictions[(doc_id, variable)]

    def model(self, variable: str) -> VariableModel:
        if variable not in self.models:
            raise UnknownVariable(f"unknown variable {variable!r}")
        return self.models[variable]

    def evaluate_holdout(
        self, holdout: Mapping[tuple[str, str], bool]
    ) -> dict[str, EvalMetrics]:
        """Per-variable held-out metrics; doc overlap with training raises."""
        per_var: dict[str, list[tuple[str, FeatureVector, bool]]] = {}
        for (doc_id, variable), value in sorted(holdout.items()):
            if variable not in self.corpus.variables:
                raise UnknownVariable(f"unknown variable {variable!r}")
            model = self.models[variable]
            fv = extract_features(self.corpus.document(doc_id), model.vocabulary)
            per_var.setdefault(variable, []).append((doc_id, fv, value))
        return {
            variable: evaluate(self.models[variable], labeled)
            for variable, labeled in per_var.items()
        }

    def evaluate_holdout_file(self, path: str | Path) -> dict[str, EvalMetrics]:
        return self.evaluate_holdout(load_seed_labels(path, self.corpus))

    # -- persistence ---------------------------------------------------

    def _write_snapshot(self) -> None:
        if self.data_dir is None:
            return
        models_payload = {}
        for variable, model in self.models.items():
            models_payload[variable] = {
                "vocabulary": dict(model.vocabulary),
                "weights": list(model.weights),
                "bias": model.bias,
                "calibration": list(model.calibration),
                "trained_counts": list(model.trained_counts),
                "trained_doc_ids": sorted(model.trained_doc_ids),
                "excluded_terms": sorted(model.excluded_terms),
            }
        payload = {
            "schema": MODEL_SNAPSHOT_SCHEMA,
            "models": models_payload,
            "signatures": {
                variable: {
                    "labels": [[d, v] for d, v in signature[0]],
                    "exclusions": list(signature[1]),
                    "emphases": [[d, list(terms)] for d, terms in signature[2]],
                }
                for variable, signature in self._signatures.items()
            },
            "last_diff": None if self.last_diff is None else self.last_diff.to_dict(),
        }
        path = self.data_dir / "models.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")
        tmp.replace(path)

    def _restore(self, snapshot_path: Path) -> None:
        payload = json.loads(snapshot_path.read_text(encoding="utf-8"))
        if payload.get("schema") != MODEL_SNAPSHOT_SCHEMA:
            raise ValueError(f"unsupported model snapshot schema in {snapshot_path}")
        hyperparams = self.config.hyperparams()
        table: dict[tuple[str, str], Prediction] = {}
        for variable in self.corpus.variables:
            entry = payload["models"].get(variable)
            if entry is None:
                model = null_model(variable, hyperparams)
            else:
                model = VariableModel(
                    variable=variable,
                    vocabulary={t: int(i) for t, i in entry["vocabulary"].items()},
                    weights=tuple(entry["weights"]),
                    bias=entry["bias"],
                    calibration=(entry["calibration"][0], entry["calibration"][1]),
                    trained_counts=(entry["trained_counts"][0], entry["trained_counts"][1]),
                    trained_doc_ids=frozenset(entry["trained_doc_ids"]),
                    excluded_terms=frozenset(entry["excluded_terms"]),
                    hyperparams=hyperparams,
                )
            self.models[variable] = model
            table.update(self._predict_column(model))
        self.predictions = table
        for variable, sig in payload.get("signatures", {}).items():
            self._signatures[variable] = (
                tuple((d, v) for d, v in sig["labels"]),
                tuple(sig["exclusions"]),
                tuple((d, tuple(terms)) for d, terms in sig["emphases"]),
            )
        raw_diff = payload.get("last_diff")
        if raw_diff is not None:
            self.last_diff = DiffReport(
                changes=tuple(
                    DiffCell(
                        doc_id=c["doc_id"],
                        variable=c["variable"],
                        old_class=PredictedClass(c["old_class"]),
                        new_class=PredictedClass(c["new_class"]),
                        old_probability=c["old_probability"],
                        new_probability=c["new_probability"],
                    )
                    for c in raw_diff["changes"]
                ),
                retrained_at=raw_diff["retrained_at"],
                feedback_count=raw_diff["feedback_count"],
            )
