"""Feedback ledger: corrections, conflicts, and compilation into labels.

Every feedback kind reduces to a set of implied (doc, variable) -> class
assertions plus optional term effects, which makes the three mechanisms
comparable for conflict analysis:

  - document label / span highlight: one implied label
  - phrase label: one implied label per document matching the word tree at
    creation time (snapshot semantics)
  - neither-term: no labels; its terms leave the variable's feature space

Pending items implying both classes for one pair are a Contradiction and
block retraining. A pending label reversing an already-applied one is an
Override: it only wins if explicitly confirmed, otherwise the earlier
label stands.

The ledger is single-writer. Persistence is an append-only JSON-lines
event log that replays to identical state.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import Corpus, Document, normalize_phrase
from .errors import (
    EmptyPhrase,
    EmptyTree,
    FeedbackError,
    NoTokenInSpan,
    NotPending,
    UnknownDocument,
    UnknownFeedback,
    UnknownReport,
    UnknownVariable,
    UnresolvedConflicts,
)
from .wordtree import WordTree, document_filter


class FeedbackKind(Enum):
    DOCUMENT_LABEL = "document_label"
    SPAN_HIGHLIGHT = "span_highlight"
    PHRASE_LABEL = "phrase_label"
    NEITHER_TERM = "neither_term"


class FeedbackStatus(Enum):
    PENDING = "pending"
    APPLIED = "applied"
    DELETED = "deleted"
    OVERRIDDEN = "overridden"


class ConflictKind(Enum):
    CONTRADICTION = "contradiction"
    OVERRIDE = "override"


@dataclass(frozen=True)
class Span:
    report_id: str
    start: int
    end: int


@dataclass
class FeedbackItem:
    id: int
    kind: FeedbackKind
    variable: str
    target_class: bool | None  # None only for NEITHER_TERM
    created_at: float
    doc_id: str | None = None
    span: Span | None = None
    phrase: tuple[str, ...] | None = None
    doc_ids: tuple[str, ...] | None = None  # phrase-label snapshot
    status: FeedbackStatus = FeedbackStatus.PENDING
    confirmed_override: bool = False

    def implied_labels(self) -> dict[tuple[str, str], bool]:
        if self.kind is FeedbackKind.NEITHER_TERM:
            return {}
        assert self.target_class is not None
        if self.kind is FeedbackKind.PHRASE_LABEL:
            return {(d, self.variable): self.target_class for d in self.doc_ids or ()}
        assert self.doc_id is not None
        return {(self.doc_id, self.variable): self.target_class}

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "variable": self.variable,
            "target_class": self.target_class,
            "created_at": self.created_at,
            "doc_id": self.doc_id,
            "span": None
            if self.span is None
            else {"report_id": self.span.report_id, "start": self.span.start, "end": self.span.end},
            "phrase": None if self.phrase is None else list(self.phrase),
            "doc_ids": None if self.doc_ids is None else list(self.doc_ids),
            "status": self.status.value,
            "confirmed_override": self.confirmed_override,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeedbackItem":
        span = data.get("span")
        return cls(
            id=data["id"],
            kind=FeedbackKind(data["kind"]),
            variable=data["variable"],
            target_class=data["target_class"],
            created_at=data["created_at"],
            doc_id=data.get("doc_id"),
            span=None if span is None else Span(span["report_id"], span["start"], span["end"]),
            phrase=None if data.get("phrase") is None else tuple(data["phrase"]),
            doc_ids=None if data.get("doc_ids") is None else tuple(data["doc_ids"]),
            status=FeedbackStatus(data.get("status", "pending")),
            confirmed_override=data.get("confirmed_override", False),
        )


@dataclass(frozen=True)
class Conflict:
    kind: ConflictKind
    variable: str
    doc_id: str
    item_ids: tuple[int, ...]
    explanation: str

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "variable": self.variable,
            "doc_id": self.doc_id,
            "item_ids": list(self.item_ids),
            "explanation": self.explanation,
        }


@dataclass(frozen=True)
class CompiledFeedback:
    labels: dict[tuple[str, str], bool]
    exclusions: dict[str, frozenset[str]]
    # span-highlight phrase terms per (doc, variable); only used when the
    # emphasis lever is enabled
    emphases: dict[tuple[str, str], tuple[str, ...]]
    # pairs won by a feedback item this round: pair -> (value, item id)
    label_sources: dict[tuple[str, str], tuple[bool, int]]
    contributing_ids: frozenset[int]
    suppressed_ids: frozenset[int]
    pending_count: int


def snap_span(document: Document, report_id: str, start: int, end: int) -> Span:
    """Snap a raw selection to full token boundaries.

    The snapped span runs from the start of the first intersected token to
    the end of the last one. Selections entirely in whitespace/punctuation
    raise NoTokenInSpan. Idempotent on its own output.
    """
    if not any(r.id == report_id for r in document.reports):
        raise UnknownReport(f"report {report_id!r} not in document {document.doc_id!r}")
    if start > end:
        start, end = end, start
    hit = [
        token
        for sentence in document.sentences
        if sentence.report_id == report_id
        for token in sentence.tokens
        if token.start < end and start < token.end
    ]
    if not hit:
        raise NoTokenInSpan(f"selection [{start}, {end}) covers no token")
    return Span(report_id, hit[0].start, hit[-1].end)


def span_phrase(document: Document, span: Span) -> tuple[str, ...]:
    return tuple(
        token.norm
        for sentence in document.sentences
        if sentence.report_id == span.report_id
        for token in sentence.tokens
        if token.start >= span.start and token.end <= span.end
    )


class FeedbackLedger:
    """Single-writer ledger over a fixed corpus.

    ``applied_labels`` materializes the per-pair outcome of past retrains:
    pair -> (value, winning item id). Override detection and compile
    precedence both read from it.
    """

    def __init__(self, corpus: Corpus, path: str | Path | None = None):
        self.corpus = corpus
        self.path = None if path is None else Path(path)
        self.items: list[FeedbackItem] = []
        self._by_id: dict[int, FeedbackItem] = {}
        self.applied_labels: dict[tuple[str, str], tuple[bool, int]] = {}
        self._next_id = 1
        self._lock = threading.RLock()  # serializes all mutations

    # -- item creation -------------------------------------------------

    def _check_variable(self, variable: str) -> None:
        if variable not in self.corpus.variables:
            raise UnknownVariable(f"unknown variable {variable!r}")

    def _check_document(self, doc_id: str) -> None:
        if not self.corpus.has_document(doc_id):
            raise UnknownDocument(f"unknown document {doc_id!r}")

    def _append(self, item: FeedbackItem) -> FeedbackItem:
        with self._lock:
            self.items.append(item)
            self._by_id[item.id] = item
            self._next_id = item.id + 1
            self._log({"event": "add", "item": item.to_dict()})
        return item

    def _new_id(self) -> int:
        return self._next_id

    def add_document_label(self, doc_id: str, variable: str, value: bool) -> FeedbackItem:
        self._check_document(doc_id)
        self._check_variable(variable)
        return self._append(
            FeedbackItem(
                id=self._new_id(),
                kind=FeedbackKind.DOCUMENT_LABEL,
                variable=variable,
                target_class=value,
                created_at=time.time(),
                doc_id=doc_id,
            )
        )

    def add_span_feedback(
        self, doc_id: str, variable: str, report_id: str, start: int, end: int, value: bool
    ) -> FeedbackItem:
        self._check_document(doc_id)
        self._check_variable(variable)
        document = self.corpus.document(doc_id)
        span = snap_span(document, report_id, start, end)
        return self._append(
            FeedbackItem(
                id=self._new_id(),
                kind=FeedbackKind.SPAN_HIGHLIGHT,
                variable=variable,
                target_class=value,
                created_at=time.time(),
                doc_id=doc_id,
                span=span,
                phrase=span_phrase(document, span),
            )
        )

    def add_phrase_feedback(self, tree: WordTree, variable: str, value: bool) -> FeedbackItem:
        self._check_variable(variable)
        if tree.is_empty:
            raise EmptyTree("word tree matches no sentences")
        doc_ids = tuple(document_filter(tree))
        for doc_id in doc_ids:
            self._check_document(doc_id)
        return self._append(
            FeedbackItem(
                id=self._new_id(),
                kind=FeedbackKind.PHRASE_LABEL,
                variable=variable,
                target_class=value,
                created_at=time.time(),
                phrase=tree.root_phrase,
                doc_ids=doc_ids,
            )
        )

    def add_neither_feedback(self, phrase: str, variable: str) -> FeedbackItem:
        self._check_variable(variable)
        norms = normalize_phrase(phrase)
        if not norms:
            raise EmptyPhrase("phrase contains no tokens")
        return self._append(
            FeedbackItem(
                id=self._new_id(),
                kind=FeedbackKind.NEITHER_TERM,
                variable=variable,
                target_class=None,
                created_at=time.time(),
                phrase=norms,
            )
        )

    # -- conflicts -----------------------------------------------------

    def pending_items(self) -> list[FeedbackItem]:
        return [i for i in self.items if i.status is FeedbackStatus.PENDING]

    def detect_conflicts(self) -> list[Conflict]:
        """Contradictions among pending labels, overrides against applied ones.

        One conflict per (doc, variable) pair, listing every implicated id.
        Confirmed overrides are resolved and no longer reported.
        """
        by_pair: dict[tuple[str, str], dict[bool, list[int]]] = {}
        for item in self.pending_items():
            for pair, value in item.implied_labels().items():
                by_pair.setdefault(pair, {}).setdefault(value, []).append(item.id)

        conflicts = []
        for pair in sorted(by_pair):
            sides = by_pair[pair]
            doc_id, variable = pair
            if True in sides and False in sides:
                ids = tuple(sorted(sides[True] + sides[False]))
                conflicts.append(
                    Conflict(
                        kind=ConflictKind.CONTRADICTION,
                        variable=variable,
                        doc_id=doc_id,
                        item_ids=ids,
                        explanation=(
                            f"pending feedback marks {doc_id}/{variable} both true "
                            f"(items {sides[True]}) and false (items {sides[False]})"
                        ),
                    )
                )
            applied = self.applied_labels.get(pair)
            if applied is None:
                continue
            applied_value, applied_id = applied
            reversing = [
                item_id
                for item_id in sides.get(not applied_value, [])
                if not self._by_id[item_id].confirmed_override
            ]
            if reversing:
                conflicts.append(
                    Conflict(
                        kind=ConflictKind.OVERRIDE,
                        variable=variable,
                        doc_id=doc_id,
                        item_ids=tuple(sorted([applied_id] + reversing)),
                        explanation=(
                            f"{doc_id}/{variable} was applied as "
                            f"{str(applied_value).lower()} by item {applied_id}; pending "
                            f"items {sorted(reversing)} reverse it (confirm to override)"
                        ),
                    )
                )
        return conflicts

    # -- resolution ----------------------------------------------------

    def _pending_item(self, feedback_id: int) -> FeedbackItem:
        item = self._by_id.get(feedback_id)
        if item is None:
            raise UnknownFeedback(f"no feedback item {feedback_id}")
        if item.status is not FeedbackStatus.PENDING:
            raise NotPending(f"item {feedback_id} is {item.status.value}, not pending")
        return item

    def delete(self, feedback_id: int) -> FeedbackItem:
        with self._lock:
            item = self._pending_item(feedback_id)
            item.status = FeedbackStatus.DELETED
            self._log({"event": "resolve", "id": feedback_id, "action": "delete"})
        return item

    def edit(self, feedback_id: int, target_class: bool) -> FeedbackItem:
        with self._lock:
            item = self._pending_item(feedback_id)
            if item.kind is FeedbackKind.NEITHER_TERM:
                raise FeedbackError("neither-term feedback has no class to edit")
            item.target_class = target_class
            self._log(
                {"event": "resolve", "id": feedback_id, "action": "edit", "target_class": target_class}
            )
        return item

    def confirm_override(self, feedback_id: int) -> FeedbackItem:
        with self._lock:
            item = self._pending_item(feedback_id)
            item.confirmed_override = True
            self._log({"event": "resolve", "id": feedback_id, "action": "confirm_override"})
        return item

    # -- compilation ---------------------------------------------------

    def compile(self, seed_labels: Mapping[tuple[str, str], bool]) -> CompiledFeedback:
        """Resolve the ledger into a training label map and term exclusions.

        Precedence: seed labels, then previously applied labels, then
        pending labels in id order. An unconfirmed pending label that
        reverses an applied one is dropped (the earlier item wins).
        Raises UnresolvedConflicts while any contradiction is pending.
        """
        contradictions = [
            c for c in self.detect_conflicts() if c.kind is ConflictKind.CONTRADICTION
        ]
        if contradictions:
            raise UnresolvedConflicts(
                f"{len(contradictions)} contradictory feedback pair(s) unresolved",
                contradictions,
            )

        labels = dict(seed_labels)
        label_sources: dict[tuple[str, str], tuple[bool, int]] = dict(self.applied_labels)
        for pair, (value, _) in self.applied_labels.items():
            labels[pair] = value

        exclusions: dict[str, set[str]] = {}
        emphases: dict[tuple[str, str], tuple[str, ...]] = {}
        contributing: set[int] = set()
        suppressed: set[int] = set()
        pending = self.pending_items()
        for item in pending:
            contributed = False
            if item.kind is FeedbackKind.NEITHER_TERM:
                exclusions.setdefault(item.variable, set()).update(item.phrase or ())
                contributed = True
            for pair, value in sorted(item.implied_labels().items()):
                applied = self.applied_labels.get(pair)
                if applied is not None and applied[0] != value and not item.confirmed_override:
                    continue
                labels[pair] = value
                label_sources[pair] = (value, item.id)
                contributed = True
            if item.kind is FeedbackKind.SPAN_HIGHLIGHT and item.phrase:
                emphases[(item.doc_id, item.variable)] = item.phrase
            if contributed:
                contributing.add(item.id)
            else:
                suppressed.add(item.id)

        for item in self.items:
            if item.status is not FeedbackStatus.APPLIED:
                continue
            if item.kind is FeedbackKind.NEITHER_TERM:
                exclusions.setdefault(item.variable, set()).update(item.phrase or ())
            if item.kind is FeedbackKind.SPAN_HIGHLIGHT and item.phrase:
                emphases.setdefault((item.doc_id, item.variable), item.phrase)

        return CompiledFeedback(
            labels=labels,
            exclusions={v: frozenset(terms) for v, terms in exclusions.items()},
            emphases=emphases,
            label_sources=label_sources,
            contributing_ids=frozenset(contributing),
            suppressed_ids=frozenset(suppressed),
            pending_count=len(pending),
        )

    def finalize_retrain(self, compiled: CompiledFeedback) -> None:
        """Mark the compiled pending items and materialize applied labels."""
        with self._lock:
            applied_ids = []
            overridden_ids = []
            for item in self.pending_items():
                if item.id in compiled.contributing_ids:
                    item.status = FeedbackStatus.APPLIED
                    applied_ids.append(item.id)
                elif item.id in compiled.suppressed_ids:
                    item.status = FeedbackStatus.OVERRIDDEN
                    overridden_ids.append(item.id)
            self.applied_labels = dict(compiled.label_sources)
            self._log(
                {
                    "event": "retrain",
                    "applied_ids": applied_ids,
                    "overridden_ids": overridden_ids,
                    "applied_labels": [
                        [doc_id, variable, value, item_id]
                        for (doc_id, variable), (value, item_id) in sorted(
                            compiled.label_sources.items()
                        )
                    ],
                }
            )

    # -- persistence ---------------------------------------------------

    def _log(self, event: dict) -> None:
        if self.path is None:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def _apply_event(self, event: dict) -> None:
        kind = event.get("event")
        if kind == "add":
            item = FeedbackItem.from_dict(event["item"])
            self.items.append(item)
            self._by_id[item.id] = item
            self._next_id = max(self._next_id, item.id + 1)
        elif kind == "resolve":
            item = self._by_id[event["id"]]
            action = event["action"]
            if action == "delete":
                item.status = FeedbackStatus.DELETED
            elif action == "edit":
                item.target_class = event["target_class"]
            elif action == "confirm_override":
                item.confirmed_override = True
        elif kind == "retrain":
            for item_id in event["applied_ids"]:
                self._by_id[item_id].status = FeedbackStatus.APPLIED
            for item_id in event["overridden_ids"]:
                self._by_id[item_id].status = FeedbackStatus.OVERRIDDEN
            self.applied_labels = {
                (doc_id, variable): (value, item_id)
                for doc_id, variable, value, item_id in event["applied_labels"]
            }

    @classmethod
    def load(cls, corpus: Corpus, path: str | Path) -> "FeedbackLedger":
        """Rebuild ledger state by replaying the event log."""
        ledger = cls(corpus, path=None)
        path = Path(path)
        if path.exists():
            for line in path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    ledger._apply_event(json.loads(line))
        ledger.path = path
        return ledger
