"""Headless evaluation harness.

Replays scripted feedback through the same engine the service uses and
reports held-out quality per retrain round, so learning curves can be
compared across feedback strategies without a UI or a human.

Script files are JSON lines. Feedback lines mirror the POST /api/feedback
bodies; control lines are {"action": "retrain"} and
{"action": "resolve", "id": n, "resolve": "delete"|"confirm_override"} or
{"action": "resolve", "id": n, "resolve": "edit", "target_class": bool}.
An optional "round" field per line must be nondecreasing.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import click

from .corpus import Corpus, load_corpus, load_seed_labels, normalize_phrase
from .engine import Engine, EngineConfig
from .errors import InvalidPolicy, ScriptError, TextLoopError
from .learner import PredictedClass
from .synth import (
    GoldInfo,
    SynthSpec,
    demo_variables,
    load_gold,
    write_synthetic_corpus,
)
from .wordtree import build_tree, drill_down

CSV_COLUMNS = ("round", "train_size", "accuracy", "precision", "recall", "f1", "unknown", "diff_size")


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    train_size: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    unknown: int
    diff_size: int


@dataclass(frozen=True)
class ConvergenceReport:
    rounds: tuple[RoundMetrics, ...]

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rounds:
            writer.writerow(
                [
                    row.round,
                    row.train_size,
                    f"{row.accuracy:.6f}",
                    f"{row.precision:.6f}",
                    f"{row.recall:.6f}",
                    f"{row.f1:.6f}",
                    row.unknown,
                    row.diff_size,
                ]
            )
        return buffer.getvalue()


def _micro_metrics(
    engine: Engine, holdout: Mapping[tuple[str, str], bool]
) -> tuple[float, float, float, float, int]:
    """Micro-averaged holdout metrics over all (doc, variable) cells."""
    per_var = engine.evaluate_holdout(holdout)
    tp = fp = fn = correct = unknown = total = 0
    for metrics in per_var.values():
        total += metrics.n
        unknown += metrics.n_unknown
        for (gold, pred), count in metrics.confusion.items():
            if pred == "unknown":
                if gold == "true":
                    fn += count
                continue
            if gold == pred:
                correct += count
            if pred == "true" and gold == "true":
                tp += count
            elif pred == "true" and gold == "false":
                fp += count
            elif pred == "false" and gold == "true":
                fn += count
    accuracy = correct / total if total else 0.0
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return accuracy, precision, recall, f1, unknown


def _train_size(engine: Engine) -> int:
    return sum(sum(m.trained_counts) for m in engine.models.values())


def _metrics_row(
    engine: Engine,
    holdout: Mapping[tuple[str, str], bool],
    round_index: int,
    diff_size: int,
) -> RoundMetrics:
    accuracy, precision, recall, f1, unknown = _micro_metrics(engine, holdout)
    return RoundMetrics(
        round=round_index,
        train_size=_train_size(engine),
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        unknown=unknown,
        diff_size=diff_size,
    )


def parse_script(text: str) -> list[dict]:
    actions = []
    last_round = None
    for i, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            action = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScriptError(f"invalid JSON ({exc})", len(actions))
        if not isinstance(action, dict):
            raise ScriptError("each line must be an object", len(actions))
        declared = action.get("round")
        if declared is not None:
            if last_round is not None and declared < last_round:
                raise ScriptError("round numbers must be nondecreasing", len(actions))
            last_round = declared
        actions.append(action)
    return actions


def _script_doc_ids(actions: Sequence[dict]) -> set[str]:
    doc_ids = set()
    for action in actions:
        if "doc_id" in action and action["doc_id"]:
            doc_ids.add(action["doc_id"])
    return doc_ids


def _apply_feedback_action(engine: Engine, action: dict, index: int) -> None:
    kind = action.get("kind")
    variable = action.get("variable", "")
    ledger = engine.ledger
    if kind == "document_label":
        ledger.add_document_label(action["doc_id"], variable, bool(action["target_class"]))
    elif kind == "span_highlight":
        span = action["span"]
        ledger.add_span_feedback(
            action["doc_id"],
            variable,
            span["report_id"],
            int(span["start"]),
            int(span["end"]),
            bool(action["target_class"]),
        )
    elif kind == "phrase_label":
        tree = build_tree(engine.corpus, action["query"])
        for step in action.get("drill", []):
            side, _, token = step.partition(":")
            direction = "forward" if side in ("f", "forward") else "backward"
            tree = drill_down(tree, direction, token)
        ledger.add_phrase_feedback(tree, variable, bool(action["target_class"]))
    elif kind == "neither_term":
        ledger.add_neither_feedback(action.get("phrase", ""), variable)
    else:
        raise ScriptError(f"unknown feedback kind {kind!r}", index)


def replay(
    corpus: Corpus,
    seed_labels: Mapping[tuple[str, str], bool],
    actions: Sequence[dict],
    holdout: Mapping[tuple[str, str], bool],
    config: EngineConfig = EngineConfig(),
) -> ConvergenceReport:
    """Run a script through the engine; one metrics row per retrain.

    Row 0 reports the seed-trained models before any feedback. Holdout
    documents must not appear in the seed labels or the script.
    """
    holdout_docs = {doc_id for doc_id, _ in holdout}
    seed_overlap = holdout_docs & {doc_id for doc_id, _ in seed_labels}
    if seed_overlap:
        raise ScriptError(
            f"holdout overlaps seed labels: {sorted(seed_overlap)[:5]}", -1
        )
    script_overlap = holdout_docs & _script_doc_ids(actions)
    if script_overlap:
        raise ScriptError(
            f"holdout overlaps scripted documents: {sorted(script_overlap)[:5]}", -1
        )

    engine = Engine(corpus, seed_labels, config)
    rows = [_metrics_row(engine, holdout, 0, 0)]
    round_index = 0
    for index, action in enumerate(actions):
        try:
            if action.get("action") == "retrain":
                diff = engine.retrain()
                round_index += 1
                rows.append(_metrics_row(engine, holdout, round_index, len(diff.changes)))
            elif action.get("action") == "resolve":
                mode = action.get("resolve")
                if mode == "delete":
                    engine.ledger.delete(int(action["id"]))
                elif mode == "edit":
                    engine.ledger.edit(int(action["id"]), bool(action["target_class"]))
                elif mode == "confirm_override":
                    engine.ledger.confirm_override(int(action["id"]))
                else:
                    raise ScriptError(f"unknown resolve mode {mode!r}", index)
            else:
                _apply_feedback_action(engine, action, index)
        except ScriptError:
            raise
        except TextLoopError as exc:
            raise ScriptError(f"{exc.code}: {exc.message}", index) from exc
        except KeyError as exc:
            raise ScriptError(f"missing field {exc}", index) from exc
    return ConvergenceReport(tuple(rows))


def _phrase_coverage(corpus: Corpus, phrase: str) -> int:
    target = normalize_phrase(phrase)
    count = 0
    for doc in corpus.documents:
        found = False
        for sentence in doc.sentences:
            norms = sentence.norms()
            k = len(target)
            if any(norms[i : i + k] == target for i in range(len(norms) - k + 1)):
                found = True
                break
        if found:
            count += 1
    return count


def policy_run(
    corpus: Corpus,
    seed_labels: Mapping[tuple[str, str], bool],
    gold: GoldInfo,
    policy: str,
    budget: int,
    holdout: Mapping[tuple[str, str], bool],
    retrain_every: int = 10,
    config: EngineConfig = EngineConfig(),
) -> ConvergenceReport:
    """Simulate a feedback strategy against gold labels.

    One action is one feedback submission. doc: label the next unlabeled
    document (corpus order) for one variable, rotating through variables.
    phrase: submit one phrase feedback for the unused gold trigger phrase
    covering the most documents. Holdout documents are never labeled;
    phrase trees are built on the corpus minus the holdout so snapshots
    cannot leak into training.
    """
    if policy not in ("doc", "phrase"):
        raise InvalidPolicy(f"unknown policy {policy!r}")
    if budget < 1:
        raise InvalidPolicy("budget must be >= 1")
    if retrain_every < 1:
        raise InvalidPolicy("retrain_every must be >= 1")

    holdout_docs = {doc_id for doc_id, _ in holdout}
    train_view = corpus.subset(d for d in corpus.doc_ids() if d not in holdout_docs)
    engine = Engine(corpus, seed_labels, config)
    rows = [_metrics_row(engine, holdout, 0, 0)]
    round_index = 0
    actions_since_retrain = 0

    def do_retrain():
        nonlocal round_index, actions_since_retrain
        diff = engine.retrain()
        round_index += 1
        actions_since_retrain = 0
        rows.append(_metrics_row(engine, holdout, round_index, len(diff.changes)))

    if policy == "doc":
        seeded = {doc_id for doc_id, _ in seed_labels}
        queue = [d for d in corpus.doc_ids() if d not in holdout_docs and d not in seeded]
        variables = corpus.variables
        for action in range(budget):
            if action >= len(queue):
                break
            # one submission per action: the next document, variables rotating
            doc_id = queue[action]
            variable = variables[action % len(variables)]
            engine.ledger.add_document_label(
                doc_id, variable, gold.labels[(doc_id, variable)]
            )
            actions_since_retrain += 1
            if actions_since_retrain == retrain_every:
                do_retrain()
    else:
        candidates = [
            (variable, phrase)
            for variable in sorted(gold.triggers)
            for phrase in gold.triggers[variable]
        ]
        scored = sorted(
            candidates,
            key=lambda pair: (-_phrase_coverage(train_view, pair[1]), pair[0], pair[1]),
        )
        used = 0
        for variable, phrase in scored:
            if used >= budget:
                break
            tree = build_tree(train_view, phrase)
            if tree.is_empty:
                continue
            engine.ledger.add_phrase_feedback(tree, variable, True)
            used += 1
            actions_since_retrain += 1
            if actions_since_retrain == retrain_every:
                do_retrain()

    if actions_since_retrain > 0:
        do_retrain()
    return ConvergenceReport(tuple(rows))


# -- CLI ---------------------------------------------------------------


@click.group()
def main():
    """Headless evaluation harness."""


def _load_inputs(corpus_path, seed_path, holdout_path):
    corpus = load_corpus(corpus_path)
    seed = load_seed_labels(seed_path, corpus)
    holdout = load_seed_labels(holdout_path, corpus)
    return corpus, seed, holdout


@main.command("replay")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--seed-labels", "seed_path", required=True, type=click.Path(exists=True))
@click.option("--script", "script_path", required=True, type=click.Path(exists=True))
@click.option("--holdout", "holdout_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--tau", default=0.1, show_default=True, type=float)
@click.option("--c", "c_value", default=1.0, show_default=True, type=float)
def replay_command(corpus_path, seed_path, script_path, holdout_path, out_path, tau, c_value):
    """Replay a feedback script and write the per-round report CSV."""
    try:
        corpus, seed, holdout = _load_inputs(corpus_path, seed_path, holdout_path)
        actions = parse_script(Path(script_path).read_text(encoding="utf-8"))
        report = replay(corpus, seed, actions, holdout, EngineConfig(tau=tau, c=c_value))
    except TextLoopError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    Path(out_path).write_text(report.to_csv(), encoding="utf-8")
    click.echo(f"wrote {len(report.rounds)} rounds to {out_path}")


@main.command("policy")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--seed-labels", "seed_path", required=True, type=click.Path(exists=True))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True))
@click.option("--holdout", "holdout_path", required=True, type=click.Path(exists=True))
@click.option("--policy", type=click.Choice(["doc", "phrase"]), required=True)
@click.option("--budget", required=True, type=int)
@click.option("--retrain-every", default=10, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
def policy_command(
    corpus_path, seed_path, gold_path, holdout_path, policy, budget, retrain_every, out_path
):
    """Run a scripted labeling policy and write its learning curve CSV."""
    try:
        corpus, seed, holdout = _load_inputs(corpus_path, seed_path, holdout_path)
        gold = load_gold(gold_path)
        report = policy_run(corpus, seed, gold, policy, budget, holdout, retrain_every)
    except TextLoopError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    Path(out_path).write_text(report.to_csv(), encoding="utf-8")
    click.echo(f"wrote {len(report.rounds)} rounds to {out_path}")


@main.command("synth")
@click.option("--n-documents", default=280, show_default=True, type=int)
@click.option("--n-variables", default=14, show_default=True, type=int)
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--gold", "gold_path", required=True, type=click.Path())
@click.option("--seed-labels", "seed_labels_path", default=None, type=click.Path())
@click.option("--seed-docs", default=30, show_default=True, type=int)
@click.option("--holdout", "holdout_path", default=None, type=click.Path())
@click.option("--holdout-docs", default=100, show_default=True, type=int)
def synth_command(
    n_documents,
    n_variables,
    seed,
    out_path,
    gold_path,
    seed_labels_path,
    seed_docs,
    holdout_path,
    holdout_docs,
):
    """Generate a synthetic corpus plus gold labels (and optional splits).

    Seed labels come from the first documents in corpus order; the holdout
    from the last, so the two never overlap.
    """
    spec = SynthSpec(
        n_documents=n_documents, variables=demo_variables(n_variables), seed=seed
    )
    try:
        corpus, gold = write_synthetic_corpus(spec, out_path, gold_path)
    except TextLoopError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    doc_ids = corpus.doc_ids()
    if seed_labels_path:
        chosen = set(doc_ids[:seed_docs])
        labels = {k: v for k, v in gold.labels.items() if k[0] in chosen}
        from .corpus import write_seed_labels

        write_seed_labels(seed_labels_path, labels)
    if holdout_path:
        chosen = set(doc_ids[-holdout_docs:]) - set(doc_ids[:seed_docs])
        labels = {k: v for k, v in gold.labels.items() if k[0] in chosen}
        from .corpus import write_seed_labels

        write_seed_labels(holdout_path, labels)
    click.echo(f"wrote {len(corpus.documents)} documents to {out_path}")


if __name__ == "__main__":
    main()
