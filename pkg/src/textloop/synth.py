"""Synthetic corpus generation.

Stands in for the clinical dataset the original tool was demonstrated on.
Each variable is driven by trigger phrases: a document's gold label is True
iff its text contains at least one trigger phrase for that variable (as a
contiguous normalized-token sequence). Trigger words are kept out of the
distractor vocabulary so the labels are clean by construction; gold labels
are still computed by scanning the generated text, which makes them exact
by definition rather than by intent.

Every document carries the same filler-word multiset, shuffled into
sentences of varying lengths. Constant filler counts mean the distractor
text carries no class signal at all, so a bag-of-words learner has a
recoverable target: the trigger words.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Corpus, build_corpus, normalize_phrase
from .errors import InvalidSpec

# Filler vocabulary for distractor sentences; loosely clinical so the
# generated reports read like the real thing.
FILLER_WORDS = (
    "patient tolerated the procedure well and was discharged in stable "
    "condition scope advanced to cecum under direct visualization prep "
    "quality was adequate moderate sedation administered without incident "
    "mucosa appeared normal throughout examined segments vital signs "
    "remained within limits during recovery mild erythema noted in the "
    "sigmoid region no acute distress reported by nursing staff impression "
    "discussed with attending physician plan follow up as indicated consent "
    "obtained prior to intervention instrument withdrawn slowly while "
    "inspecting folds retroflexion performed in rectum visual field clear "
    "after irrigation findings reviewed against previous study history of "
    "screening interval appropriate for age risk category low moderate "
    "tissue appeared intact with vascular pattern preserved diet resumed "
    "same evening activity unrestricted results pending review laboratory "
    "values unremarkable on admission summary dictated electronically"
).split()

DEFAULT_HEADER = "***** DE-IDENTIFIED *****"
DEFAULT_FOOTER = "END OF REPORT"


@dataclass(frozen=True)
class VariableRule:
    name: str
    trigger_phrases: tuple[str, ...]
    prevalence: float = 0.5


@dataclass(frozen=True)
class SynthSpec:
    n_documents: int
    variables: tuple[VariableRule, ...]
    seed: int
    words_per_sentence: tuple[int, int] = (5, 10)
    pathology_probability: float = 0.4
    header: str = DEFAULT_HEADER
    footer: str = DEFAULT_FOOTER


@dataclass(frozen=True)
class GoldInfo:
    """Ground truth emitted alongside a synthetic corpus."""

    labels: dict[tuple[str, str], bool]
    triggers: dict[str, tuple[str, ...]] = field(default_factory=dict)


def demo_variables(n: int = 14) -> tuple[VariableRule, ...]:
    """A bank of boolean variables with colonoscopy-flavored trigger phrases."""
    bank = [
        VariableRule("biopsy", ("hot biopsy", "cold biopsy", "biopsy taken"), 0.5),
        VariableRule("polyp", ("pedunculated polyp", "sessile polyp"), 0.45),
        VariableRule("bleeding", ("active bleeding", "bleeding controlled"), 0.3),
        VariableRule("perforation", ("perforation suspected", "possible perforation"), 0.15),
        VariableRule("snare", ("snare resection", "snare polypectomy"), 0.4),
        VariableRule("tattoo", ("tattoo placed", "tattoo applied"), 0.25),
        VariableRule("diverticula", ("diverticula present", "scattered diverticula"), 0.5),
        VariableRule("hemorrhoid", ("internal hemorrhoids", "external hemorrhoids"), 0.45),
        VariableRule("mass", ("fungating mass", "obstructing mass"), 0.2),
        VariableRule("ulcer", ("ulcer identified", "shallow ulcer noted"), 0.3),
        VariableRule("stricture", ("stricture encountered", "benign stricture"), 0.25),
        VariableRule("ileum", ("ileum intubated", "terminal ileum examined"), 0.55),
        VariableRule("adenoma", ("tubular adenoma", "villous adenoma"), 0.4),
        VariableRule("colitis", ("colitis pattern", "segmental colitis"), 0.3),
    ]
    return tuple(bank[:n])


def _validate(spec: SynthSpec) -> None:
    if spec.n_documents < 0:
        raise InvalidSpec("n_documents must be >= 0")
    if not spec.variables:
        raise InvalidSpec("at least one variable rule required")
    names = [v.name for v in spec.variables]
    if len(set(names)) != len(names):
        raise InvalidSpec("variable names must be unique")
    for rule in spec.variables:
        if not rule.trigger_phrases:
            raise InvalidSpec(f"variable {rule.name!r} has no trigger phrases")
        if not 0.0 <= rule.prevalence <= 1.0:
            raise InvalidSpec(f"variable {rule.name!r} prevalence outside [0, 1]")
        for phrase in rule.trigger_phrases:
            if not normalize_phrase(phrase):
                raise InvalidSpec(f"variable {rule.name!r} has an empty trigger phrase")
    lo, hi = spec.words_per_sentence
    if lo < 1 or hi < lo:
        raise InvalidSpec("words_per_sentence must be a valid range")


def _distractor_multiset(spec: SynthSpec) -> list[str]:
    """The filler words every document carries; identical across documents."""
    trigger_words = set()
    for rule in spec.variables:
        for phrase in rule.trigger_phrases:
            trigger_words.update(normalize_phrase(phrase))
    vocab = [w for w in dict.fromkeys(FILLER_WORDS) if w not in trigger_words]
    if not vocab:
        raise InvalidSpec("trigger phrases exhaust the filler vocabulary")
    # first third appears twice per document so within-sentence repetition
    # exists, but still at a fixed count
    return vocab + vocab[: len(vocab) // 3]


def _as_sentence(words: list[str]) -> str:
    words = list(words)
    words[0] = words[0].capitalize()
    return " ".join(words) + "."


def _report_text(spec: SynthSpec, sentences: list[str]) -> str:
    # the report kind lives in structured metadata, not the text: a kind
    # line would only repeat across a random subset of documents and leak
    # sub-threshold boilerplate tokens into the feature space
    paragraphs = []
    for i in range(0, len(sentences), 3):
        paragraphs.append(" ".join(sentences[i : i + 3]))
    body = "\n\n".join(paragraphs)
    return f"{spec.header}\n\n{body}\n\n{spec.footer}\n"


def synth_records(spec: SynthSpec) -> dict:
    """Generate the corpus-file structure (JSON-ready dict) for a spec."""
    _validate(spec)
    rng = random.Random(spec.seed)
    multiset = _distractor_multiset(spec)
    records = []
    for i in range(spec.n_documents):
        doc_id = f"P{i:04d}"
        pool = list(multiset)
        rng.shuffle(pool)

        trigger_sentences = []
        for rule in spec.variables:
            if rng.random() < rule.prevalence:
                phrase = rng.choice(rule.trigger_phrases)
                padding = [pool.pop() for _ in range(min(rng.randint(2, 4), len(pool)))]
                position = rng.randint(0, len(padding))
                padding[position:position] = [phrase]
                trigger_sentences.append(_as_sentence(padding))

        lo, hi = spec.words_per_sentence
        sentences = []
        while pool:
            take = min(rng.randint(lo, hi), len(pool))
            sentences.append(_as_sentence([pool.pop() for _ in range(take)]))
        for sentence in trigger_sentences:
            sentences.insert(rng.randint(0, len(sentences)), sentence)

        has_pathology = rng.random() < spec.pathology_probability
        if has_pathology and len(sentences) >= 2:
            split = rng.randint(1, len(sentences) - 1)
            endo_sents, path_sents = sentences[:split], sentences[split:]
        else:
            endo_sents, path_sents = sentences, None

        reports = [
            {
                "id": f"{doc_id}-endo",
                "kind": "endoscopy",
                "text": _report_text(spec, endo_sents),
            }
        ]
        if path_sents is not None:
            reports.append(
                {
                    "id": f"{doc_id}-path",
                    "kind": "pathology",
                    "text": _report_text(spec, path_sents),
                }
            )
        records.append({"patient_id": doc_id, "reports": reports})
    return {"variables": [v.name for v in spec.variables], "records": records}


def _contains_phrase(norms: tuple[str, ...], phrase: tuple[str, ...]) -> bool:
    k = len(phrase)
    return any(norms[i : i + k] == phrase for i in range(len(norms) - k + 1))


def generate_synthetic_corpus(spec: SynthSpec) -> tuple[Corpus, GoldInfo]:
    """Deterministic corpus plus gold labels for a generation spec.

    Gold labels are computed from the generated text itself: True iff any
    sentence contains one of the variable's trigger phrases.
    """
    data = synth_records(spec)
    corpus = build_corpus(data)
    phrase_map = {
        rule.name: tuple(normalize_phrase(p) for p in rule.trigger_phrases)
        for rule in spec.variables
    }
    labels: dict[tuple[str, str], bool] = {}
    for doc in corpus.documents:
        sentence_norms = [s.norms() for s in doc.sentences]
        for rule in spec.variables:
            hit = any(
                _contains_phrase(norms, phrase)
                for norms in sentence_norms
                for phrase in phrase_map[rule.name]
            )
            labels[(doc.doc_id, rule.name)] = hit
    triggers = {rule.name: rule.trigger_phrases for rule in spec.variables}
    return corpus, GoldInfo(labels=labels, triggers=triggers)


def write_synthetic_corpus(
    spec: SynthSpec, corpus_path: str | Path, gold_path: str | Path | None = None
) -> tuple[Corpus, GoldInfo]:
    """Generate and write the corpus file (and optionally the gold file)."""
    data = synth_records(spec)
    Path(corpus_path).write_text(
        json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    corpus, gold = generate_synthetic_corpus(spec)
    if gold_path is not None:
        gold_data = {
            "labels": [
                {"doc_id": d, "variable": v, "value": val}
                for (d, v), val in sorted(gold.labels.items())
            ],
            "triggers": {k: list(v) for k, v in sorted(gold.triggers.items())},
        }
        Path(gold_path).write_text(
            json.dumps(gold_data, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return corpus, gold


def load_gold(path: str | Path) -> GoldInfo:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    labels = {
        (e["doc_id"], e["variable"]): bool(e["value"]) for e in data.get("labels", [])
    }
    triggers = {k: tuple(v) for k, v in data.get("triggers", {}).items()}
    return GoldInfo(labels=labels, triggers=triggers)
