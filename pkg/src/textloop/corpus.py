"""Corpus loading and structuring.

A corpus is a set of documents, each formed by linking the reports of one
patient record. Loading segments every report into sentences, tokenizes
them, and marks boilerplate lines (headers, separators, template text) so
downstream feature extraction and display can skip them.

All structures are immutable after construction; loading is deterministic
for identical input bytes.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import EmptyRecord, MalformedCorpus

REPORT_SEPARATOR = "\n\n"

# Words that end with a period without ending the sentence. Lowercase,
# no trailing dot; internal dots allowed ("e.g").
DEFAULT_ABBREVIATIONS = frozenset(
    {
        "dr", "mr", "mrs", "ms", "prof", "jr", "sr", "st", "vs", "etc",
        "e.g", "i.e", "a.m", "p.m", "fig", "cf",
    }
)

# Separator lines made only of dashes/asterisks (and similar rules) are
# boilerplate regardless of repetition.
SEPARATOR_LINE = re.compile(r"^\s*[-*=_]{3,}\s*$")

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_SENTENCE_PUNCT = ".!?"


class ReportKind(Enum):
    ENDOSCOPY = "endoscopy"
    PATHOLOGY = "pathology"
    OTHER = "other"


@dataclass(frozen=True)
class Report:
    id: str
    kind: ReportKind
    text: str


@dataclass(frozen=True)
class Token:
    surface: str
    norm: str
    start: int  # offsets into the owning report's text
    end: int


@dataclass(frozen=True)
class Sentence:
    report_id: str
    start: int
    end: int
    tokens: tuple[Token, ...]

    def norms(self) -> tuple[str, ...]:
        return tuple(t.norm for t in self.tokens)


@dataclass(frozen=True)
class Document:
    doc_id: str
    reports: tuple[Report, ...]
    sentences: tuple[Sentence, ...]
    # Spans into the concatenated report text (reports joined by
    # REPORT_SEPARATOR), disjoint and sorted.
    boilerplate: tuple[tuple[int, int], ...] = ()

    def report_base(self, report_id: str) -> int:
        """Offset of a report's text within the concatenated document text."""
        base = 0
        for report in self.reports:
            if report.id == report_id:
                return base
            base += len(report.text) + len(REPORT_SEPARATOR)
        raise KeyError(report_id)

    @property
    def full_text(self) -> str:
        return REPORT_SEPARATOR.join(r.text for r in self.reports)

    def report(self, report_id: str) -> Report:
        for r in self.reports:
            if r.id == report_id:
                return r
        raise KeyError(report_id)

    def concat_span(self, report_id: str, start: int, end: int) -> tuple[int, int]:
        base = self.report_base(report_id)
        return (base + start, base + end)

    def _in_boilerplate(self, concat_start: int, concat_end: int) -> bool:
        for b_start, b_end in self.boilerplate:
            if concat_start < b_end and b_start < concat_end:
                return True
        return False

    def iter_tokens(self, include_boilerplate: bool = False) -> Iterator[tuple[Sentence, Token]]:
        """Tokens in document order, skipping boilerplate unless asked."""
        bases = {}
        base = 0
        for report in self.reports:
            bases[report.id] = base
            base += len(report.text) + len(REPORT_SEPARATOR)
        for sentence in self.sentences:
            rbase = bases[sentence.report_id]
            for token in sentence.tokens:
                if not include_boilerplate and self._in_boilerplate(
                    rbase + token.start, rbase + token.end
                ):
                    continue
                yield sentence, token


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    variables: tuple[str, ...]
    _by_id: Mapping[str, Document] = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {d.doc_id: d for d in self.documents})

    def document(self, doc_id: str) -> Document:
        return self._by_id[doc_id]

    def has_document(self, doc_id: str) -> bool:
        return doc_id in self._by_id

    def doc_ids(self) -> tuple[str, ...]:
        return tuple(d.doc_id for d in self.documents)

    def subset(self, doc_ids: Iterable[str]) -> "Corpus":
        """Corpus restricted to the given documents, corpus order preserved."""
        keep = set(doc_ids)
        return Corpus(
            documents=tuple(d for d in self.documents if d.doc_id in keep),
            variables=self.variables,
        )

    def iter_sentences(self) -> Iterator[tuple[Document, int, Sentence]]:
        for doc in self.documents:
            for idx, sentence in enumerate(doc.sentences):
                yield doc, idx, sentence


def tokenize(text: str, offset: int = 0) -> tuple[Token, ...]:
    """Split text into maximal alphanumeric runs.

    Offsets are relative to the string passed in, shifted by ``offset`` so
    sentence-relative calls can produce report-relative spans. Surfaces
    reconstruct the input exactly at their spans.
    """
    tokens = []
    for match in _TOKEN_RE.finditer(text):
        surface = match.group(0)
        norm = surface.casefold().strip(".,;:!?'\"()[]{}")
        if not norm:
            continue
        tokens.append(Token(surface, norm, offset + match.start(), offset + match.end()))
    return tuple(tokens)


def normalize_phrase(text: str) -> tuple[str, ...]:
    """Normalized token sequence of a phrase, as used for matching."""
    return tuple(t.norm for t in tokenize(text))


def _is_abbreviation(text: str, dot_index: int, abbreviations: frozenset[str]) -> bool:
    start = dot_index
    while start > 0 and (text[start - 1].isalpha() or text[start - 1] == "."):
        start -= 1
    word = text[start:dot_index].strip(".")
    if not word or not any(c.isalpha() for c in word):
        return False
    return word.casefold() in abbreviations


def segment_sentences(
    text: str, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS
) -> tuple[tuple[int, int], ...]:
    """Sentence spans over a single report text.

    Splits after terminal punctuation (. ! ?) followed by whitespace, and at
    blank lines. A single period does not split when the preceding word is a
    known abbreviation. Every non-whitespace character lands in exactly one
    span; spans are trimmed to non-whitespace extents.
    """
    breaks = []  # (end_of_left_segment, start_of_right_segment)
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c in _SENTENCE_PUNCT:
            j = i
            while j + 1 < n and text[j + 1] in _SENTENCE_PUNCT:
                j += 1
            if j + 1 >= n or text[j + 1].isspace():
                single_dot = j == i and c == "."
                if not (single_dot and _is_abbreviation(text, i, abbreviations)):
                    breaks.append((j + 1, j + 1))
            i = j + 1
            continue
        if c == "\n":
            k = i + 1
            while k < n and text[k] in " \t\r":
                k += 1
            if k < n and text[k] == "\n":
                breaks.append((i, k + 1))
                i = k + 1
                continue
        i += 1

    spans = []
    seg_start = 0
    for end, nxt in breaks + [(n, n)]:
        segment = text[seg_start:end]
        stripped = segment.strip()
        if stripped:
            lead = len(segment) - len(segment.lstrip())
            spans.append((seg_start + lead, seg_start + lead + len(stripped)))
        seg_start = nxt
    return tuple(spans)


def _segment_report(report: Report, abbreviations: frozenset[str]) -> tuple[Sentence, ...]:
    sentences = []
    for start, end in segment_sentences(report.text, abbreviations):
        tokens = tokenize(report.text[start:end], offset=start)
        sentences.append(Sentence(report.id, start, end, tokens))
    return tuple(sentences)


def link_reports(
    records: Sequence[tuple[str, Sequence[Report]]],
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS,
) -> list[Document]:
    """One segmented Document per patient record.

    When a record carries both endoscopy and pathology reports, endoscopy
    reports are moved to the front (stable); otherwise input order is kept.
    """
    documents = []
    for patient_id, reports in records:
        if not reports:
            raise EmptyRecord(f"patient record {patient_id!r} has no reports")
        kinds = {r.kind for r in reports}
        ordered = list(reports)
        if ReportKind.ENDOSCOPY in kinds and ReportKind.PATHOLOGY in kinds:
            ordered.sort(key=lambda r: 0 if r.kind is ReportKind.ENDOSCOPY else 1)
        sentences = []
        for report in ordered:
            sentences.extend(_segment_report(report, abbreviations))
        documents.append(Document(patient_id, tuple(ordered), tuple(sentences)))
    return documents


def _iter_lines(text: str) -> Iterator[tuple[int, int]]:
    start = 0
    for match in re.finditer(r"\n", text):
        yield start, match.start()
        start = match.end()
    yield start, len(text)


def detect_boilerplate(
    document: Document,
    patterns: Sequence[str] = (),
    repeated_lines: frozenset[str] = frozenset(),
) -> tuple[tuple[int, int], ...]:
    """Boilerplate line spans (concatenated-text offsets), disjoint and sorted.

    A line is boilerplate when it is a separator line (dashes/asterisks
    only), matches a configured pattern, or — stripped — appears in the
    precomputed repeated-line set.
    """
    compiled = [re.compile(p) for p in patterns]
    spans = []
    base = 0
    for report in document.reports:
        for line_start, line_end in _iter_lines(report.text):
            line = report.text[line_start:line_end]
            stripped = line.strip()
            if not stripped:
                continue
            if (
                SEPARATOR_LINE.match(line)
                or any(p.search(line) for p in compiled)
                or stripped in repeated_lines
            ):
                lead = len(line) - len(line.lstrip())
                spans.append(
                    (base + line_start + lead, base + line_start + lead + len(stripped))
                )
        base += len(report.text) + len(REPORT_SEPARATOR)
    return tuple(spans)


def repeated_line_set(
    documents: Sequence[Document], threshold: float = 0.5
) -> frozenset[str]:
    """Stripped lines appearing in at least ``threshold`` of the documents.

    Needs at least two documents; with one, repetition carries no signal.
    """
    if len(documents) < 2:
        return frozenset()
    counts: Counter[str] = Counter()
    for doc in documents:
        lines = set()
        for report in doc.reports:
            for start, end in _iter_lines(report.text):
                stripped = report.text[start:end].strip()
                if stripped:
                    lines.add(stripped)
        counts.update(lines)
    n = len(documents)
    return frozenset(line for line, c in counts.items() if c / n >= threshold)


def load_boilerplate_patterns(path: str | Path) -> list[str]:
    """One regular expression per line; ``#`` starts a comment."""
    patterns = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        patterns.append(line)
    return patterns


def _parse_report(entry: object, location: str) -> Report:
    if not isinstance(entry, dict):
        raise MalformedCorpus("report must be an object", location)
    rid = entry.get("id")
    if not isinstance(rid, str) or not rid:
        raise MalformedCorpus("report id must be a nonempty string", location)
    kind_raw = entry.get("kind", "other")
    try:
        kind = ReportKind(str(kind_raw).lower())
    except ValueError:
        raise MalformedCorpus(f"unknown report kind {kind_raw!r}", location) from None
    text = entry.get("text", "")
    if not isinstance(text, str):
        raise MalformedCorpus("report text must be a string", location)
    if not text and kind is not ReportKind.OTHER:
        raise MalformedCorpus(
            f"empty text only allowed for kind 'other', got {kind.value!r}", location
        )
    return Report(rid, kind, text)


def build_corpus(
    data: object,
    boilerplate_patterns: Sequence[str] = (),
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS,
    repeated_line_threshold: float = 0.5,
) -> Corpus:
    """Validate the corpus-file structure and build a fully segmented Corpus."""
    if not isinstance(data, dict):
        raise MalformedCorpus("top level must be an object", "$")
    variables = data.get("variables")
    if not isinstance(variables, list) or not variables:
        raise MalformedCorpus("variables must be a nonempty list", "variables")
    if not all(isinstance(v, str) and v for v in variables):
        raise MalformedCorpus("variable names must be nonempty strings", "variables")
    if len(set(variables)) != len(variables):
        raise MalformedCorpus("variable names must be unique", "variables")

    records_raw = data.get("records")
    if not isinstance(records_raw, list):
        raise MalformedCorpus("records must be a list", "records")

    records: list[tuple[str, list[Report]]] = []
    seen_ids: set[str] = set()
    for i, rec in enumerate(records_raw):
        loc = f"records[{i}]"
        if not isinstance(rec, dict):
            raise MalformedCorpus("record must be an object", loc)
        pid = rec.get("patient_id")
        if not isinstance(pid, str) or not pid:
            raise MalformedCorpus("patient_id must be a nonempty string", loc)
        if pid in seen_ids:
            raise MalformedCorpus(f"duplicate doc_id {pid!r}", loc)
        seen_ids.add(pid)
        reports_raw = rec.get("reports")
        if not isinstance(reports_raw, list) or not reports_raw:
            raise MalformedCorpus("reports must be a nonempty list", loc)
        reports = []
        report_ids = set()
        for j, entry in enumerate(reports_raw):
            report = _parse_report(entry, f"{loc}.reports[{j}]")
            if report.id in report_ids:
                raise MalformedCorpus(
                    f"duplicate report id {report.id!r}", f"{loc}.reports[{j}]"
                )
            report_ids.add(report.id)
            reports.append(report)
        records.append((pid, reports))

    documents = link_reports(records, abbreviations)
    repeated = repeated_line_set(documents, repeated_line_threshold)
    documents = [
        replace(
            doc,
            boilerplate=detect_boilerplate(doc, boilerplate_patterns, repeated),
        )
        for doc in documents
    ]
    return Corpus(tuple(documents), tuple(variables))


def load_corpus(
    path: str | Path,
    boilerplate_patterns: Sequence[str] = (),
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS,
) -> Corpus:
    """Load a corpus file (JSON, see README for the schema)."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedCorpus(f"invalid JSON: {exc}", str(path)) from exc
    return build_corpus(data, boilerplate_patterns, abbreviations)


def load_seed_labels(path: str | Path, corpus: Corpus) -> dict[tuple[str, str], bool]:
    """Load a seed-label file: {"labels": [{doc_id, variable, value}...]}."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedCorpus(f"invalid JSON: {exc}", str(path)) from exc
    if not isinstance(data, dict) or not isinstance(data.get("labels"), list):
        raise MalformedCorpus("expected an object with a 'labels' list", str(path))
    labels: dict[tuple[str, str], bool] = {}
    for i, entry in enumerate(data["labels"]):
        loc = f"labels[{i}]"
        if not isinstance(entry, dict):
            raise MalformedCorpus("label must be an object", loc)
        doc_id = entry.get("doc_id")
        variable = entry.get("variable")
        value = entry.get("value")
        if not isinstance(doc_id, str) or not corpus.has_document(doc_id):
            raise MalformedCorpus(f"unknown doc_id {doc_id!r}", loc)
        if variable not in corpus.variables:
            raise MalformedCorpus(f"unknown variable {variable!r}", loc)
        if not isinstance(value, bool):
            raise MalformedCorpus("value must be true or false", loc)
        labels[(doc_id, variable)] = value
    return labels


def write_seed_labels(path: str | Path, labels: Mapping[tuple[str, str], bool]) -> None:
    entries = [
        {"doc_id": d, "variable": v, "value": val}
        for (d, v), val in sorted(labels.items())
    ]
    Path(path).write_text(
        json.dumps({"labels": entries}, indent=2) + "\n", encoding="utf-8"
    )
