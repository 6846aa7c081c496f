from __future__ import annotations

import json

import pytest

from textloop.errors import InvalidSpec
from textloop.synth import (
    SynthSpec,
    VariableRule,
    demo_variables,
    generate_synthetic_corpus,
    load_gold,
    synth_records,
    write_synthetic_corpus,
)


def test_full_scale_generation(full_scale):
    corpus, gold = full_scale
    assert len(corpus.documents) == 280
    assert len(corpus.variables) == 14
    assert len(gold.labels) == 280 * 14


def test_empty_spec_gives_empty_corpus():
    spec = SynthSpec(n_documents=0, variables=demo_variables(1), seed=1)
    corpus, gold = generate_synthetic_corpus(spec)
    assert corpus.documents == ()
    assert gold.labels == {}


def test_same_seed_byte_identical():
    spec = SynthSpec(n_documents=12, variables=demo_variables(4), seed=99)
    a = json.dumps(synth_records(spec), sort_keys=True)
    b = json.dumps(synth_records(spec), sort_keys=True)
    assert a == b


def test_different_seed_differs():
    base = dict(n_documents=12, variables=demo_variables(4))
    a = synth_records(SynthSpec(seed=1, **base))
    b = synth_records(SynthSpec(seed=2, **base))
    assert a != b


def test_gold_matches_trigger_scan(small_synth):
    # independent scan: raw lowercase word sequences per sentence
    corpus, gold = small_synth
    triggers = {v: [p.lower().split() for p in ps] for v, ps in gold.triggers.items()}
    for doc in corpus.documents:
        words = []
        for report in doc.reports:
            for sentence in report.text.replace("\n", " ").split("."):
                words.append([w.strip(",;:").lower() for w in sentence.split()])
        for variable, phrase_lists in triggers.items():
            hit = any(
                words_k[i : i + len(ph)] == ph
                for words_k in words
                for ph in phrase_lists
                for i in range(len(words_k))
            )
            assert gold.labels[(doc.doc_id, variable)] == hit, (doc.doc_id, variable)


def test_invalid_specs_rejected():
    with pytest.raises(InvalidSpec):
        generate_synthetic_corpus(SynthSpec(n_documents=-1, variables=demo_variables(1), seed=1))
    with pytest.raises(InvalidSpec):
        generate_synthetic_corpus(SynthSpec(n_documents=1, variables=(), seed=1))
    with pytest.raises(InvalidSpec):
        generate_synthetic_corpus(
            SynthSpec(n_documents=1, variables=(VariableRule("v", ("",)),), seed=1)
        )
    with pytest.raises(InvalidSpec):
        generate_synthetic_corpus(
            SynthSpec(n_documents=1, variables=(VariableRule("v", ("x",), 1.5),), seed=1)
        )


def test_write_and_load_gold(tmp_path):
    spec = SynthSpec(n_documents=8, variables=demo_variables(2), seed=3)
    corpus, gold = write_synthetic_corpus(
        spec, tmp_path / "corpus.json", tmp_path / "gold.json"
    )
    loaded = load_gold(tmp_path / "gold.json")
    assert loaded.labels == gold.labels
    assert loaded.triggers == gold.triggers
    from textloop.corpus import load_corpus

    assert load_corpus(tmp_path / "corpus.json") == corpus


def test_filler_counts_constant_across_documents(small_synth):
    # the distractor multiset is identical per document, so filler token
    # counts must not vary between documents
    corpus, gold = small_synth
    trigger_words = {
        w for ps in gold.triggers.values() for p in ps for w in p.lower().split()
    }
    counts_per_doc = []
    for doc in corpus.documents[:10]:
        counts: dict[str, int] = {}
        for _, token in doc.iter_tokens():
            if token.norm not in trigger_words:
                counts[token.norm] = counts.get(token.norm, 0) + 1
        counts_per_doc.append(counts)
    assert all(c == counts_per_doc[0] for c in counts_per_doc[1:])
