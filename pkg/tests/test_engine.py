from __future__ import annotations

import threading

import pytest

from textloop.engine import Engine, EngineConfig, diff_tables
from textloop.errors import Busy, OverlapError, UnresolvedConflicts
from textloop.learner import PredictedClass
from textloop.wordtree import build_tree

from conftest import make_corpus


def brute_force_diff(old, new):
    return {
        key for key in new if old[key].cls is not new[key].cls
    }


@pytest.fixture
def seeded(small_synth):
    corpus, gold = small_synth
    doc_ids = corpus.doc_ids()
    seed = {k: v for k, v in gold.labels.items() if k[0] in set(doc_ids[:20])}
    return corpus, gold, seed


def test_initial_training_covers_all_cells(seeded):
    corpus, gold, seed = seeded
    engine = Engine(corpus, seed, EngineConfig())
    assert set(engine.predictions) == {
        (d, v) for d in corpus.doc_ids() for v in corpus.variables
    }


def test_empty_ledger_retrain_is_noop(seeded):
    corpus, gold, seed = seeded
    engine = Engine(corpus, seed, EngineConfig())
    before = dict(engine.predictions)
    diff = engine.retrain()
    assert diff.changes == ()
    assert engine.predictions == before


def test_retrain_diff_matches_brute_force(seeded):
    corpus, gold, seed = seeded
    engine = Engine(corpus, seed, EngineConfig())
    before = dict(engine.predictions)
    # flip several labels against gold to force changes
    flip_docs = corpus.doc_ids()[20:26]
    for d in flip_docs:
        engine.ledger.add_document_label(d, "biopsy", not gold.labels[(d, "biopsy")])
    diff = engine.retrain()
    after = engine.predictions
    assert diff.changed_cells == brute_force_diff(before, after)
    assert len(diff.changes) > 0
    for cell in diff.changes:
        assert cell.old_class is not cell.new_class


def test_retrain_only_touched_variables_refit(seeded):
    corpus, gold, seed = seeded
    engine = Engine(corpus, seed, EngineConfig())
    models_before = dict(engine.models)
    d = corpus.doc_ids()[30]
    engine.ledger.add_document_label(d, "biopsy", True)
    engine.retrain()
    assert engine.models["biopsy"] is not models_before["biopsy"]
    for variable in corpus.variables:
        if variable != "biopsy":
            assert engine.models[variable] is models_before[variable]


def test_feedback_label_flip_changes_cell(seeded):
    corpus, gold, seed = seeded
    engine = Engine(corpus, seed, EngineConfig())
    doc_id = corpus.doc_ids()[0]  # a seed document
    old_cls = engine.prediction(doc_id, "biopsy").cls
    engine.ledger.add_document_label(doc_id, "biopsy", not gold.labels[(doc_id, "biopsy")])
    diff = engine.retrain()
    assert any(c.doc_id == doc_id and c.variable == "biopsy" for c in diff.changes) or (
        engine.prediction(doc_id, "biopsy").cls is old_cls
    )


def test_retrain_blocked_by_contradiction_until_resolved(seeded):
    corpus, gold, seed = seeded
    engine = Engine(corpus, seed, EngineConfig())
    d = corpus.doc_ids()[25]
    a = engine.ledger.add_document_label(d, "biopsy", True)
    engine.ledger.add_document_label(d, "biopsy", False)
    with pytest.raises(UnresolvedConflicts):
        engine.retrain()
    engine.ledger.delete(a.id)
    diff = engine.retrain()  # now permitted
    assert engine.ledger.pending_items() == []


def test_neither_feedback_zeroes_term_weight(seeded):
    corpus, gold, seed = seeded
    engine = Engine(corpus, seed, EngineConfig())
    model = engine.models["biopsy"]
    assert model.term_weight("biopsy") != 0.0
    engine.ledger.add_neither_feedback("biopsy", "biopsy")
    engine.retrain()
    model = engine.models["biopsy"]
    assert model.term_weight("biopsy") == 0.0
    assert "biopsy" not in model.vocabulary


def test_phrase_feedback_labels_matching_documents(seeded):
    corpus, gold, seed = seeded
    engine = Engine(corpus, seed, EngineConfig())
    tree = build_tree(corpus, "hot biopsy")
    matching = {s.doc_id for s in tree.matched_sites}
    engine.ledger.add_phrase_feedback(tree, "biopsy", True)
    engine.retrain()
    trained = engine.models["biopsy"].trained_doc_ids
    assert matching <= set(trained)


def test_busy_while_retrain_in_flight(seeded):
    corpus, gold, seed = seeded
    engine = Engine(corpus, seed, EngineConfig())
    engine._retrain_lock.acquire()
    try:
        with pytest.raises(Busy):
            engine.retrain()
    finally:
        engine._retrain_lock.release()
    engine.retrain()  # lock released, works again


def test_concurrent_readers_see_complete_snapshots(seeded):
    corpus, gold, seed = seeded
    engine = Engine(corpus, seed, EngineConfig())
    errors = []
    stop = threading.Event()

    def reader():
        while not stop.is_set():
            table = engine.predictions
            keys = set(table)
            if keys != {(d, v) for d in corpus.doc_ids() for v in corpus.variables}:
                errors.append("partial table")

    threads = [threading.Thread(target=reader) for _ in range(3)]
    for t in threads:
        t.start()
    for i, d in enumerate(corpus.doc_ids()[20:24]):
        engine.ledger.add_document_label(d, "biopsy", i % 2 == 0)
        engine.retrain()
    stop.set()
    for t in threads:
        t.join()
    assert errors == []


def test_persistence_roundtrip(tmp_path, seeded):
    corpus, gold, seed = seeded
    data_dir = tmp_path / "state"
    engine = Engine(corpus, seed, EngineConfig(), data_dir=data_dir)
    for d in corpus.doc_ids()[20:24]:
        engine.ledger.add_document_label(d, "biopsy", gold.labels[(d, "biopsy")])
    diff = engine.retrain()

    restored = Engine(corpus, seed, EngineConfig(), data_dir=data_dir)
    assert restored.predictions == engine.predictions
    assert restored.last_diff == engine.last_diff
    assert [i.to_dict() for i in restored.ledger.items] == [
        i.to_dict() for i in engine.ledger.items
    ]
    # a further retrain behaves identically from the restored state
    restored.ledger.add_document_label(corpus.doc_ids()[25], "polyp", True)
    restored.retrain()


def test_persisted_restart_skips_retraining(tmp_path, seeded, monkeypatch):
    corpus, gold, seed = seeded
    data_dir = tmp_path / "state"
    engine = Engine(corpus, seed, EngineConfig(), data_dir=data_dir)
    table = dict(engine.predictions)

    import textloop.engine as engine_module

    def boom(*args, **kwargs):
        raise AssertionError("restore path must not retrain")

    monkeypatch.setattr(engine_module, "train", boom)
    restored = Engine(corpus, seed, EngineConfig(), data_dir=data_dir)
    assert restored.predictions == table


def test_evaluate_holdout_overlap_rejected(seeded):
    corpus, gold, seed = seeded
    engine = Engine(corpus, seed, EngineConfig())
    overlap_doc = corpus.doc_ids()[0]
    with pytest.raises(OverlapError):
        engine.evaluate_holdout({(overlap_doc, "biopsy"): True})


def test_diff_tables_empty_iff_no_class_changed(seeded):
    corpus, gold, seed = seeded
    engine = Engine(corpus, seed, EngineConfig())
    table = engine.predictions
    report = diff_tables(table, table, 0)
    assert report.changes == ()


def test_span_emphasis_lever_off_by_default(seeded):
    corpus, gold, seed = seeded
    plain = Engine(corpus, seed, EngineConfig())
    doc = corpus.documents[21]
    text = doc.reports[0].text
    token = next(t for s in doc.sentences for t in s.tokens if t.norm.isalpha())
    plain.ledger.add_span_feedback(
        doc.doc_id, "biopsy", doc.reports[0].id, token.start, token.end, True
    )
    compiled = plain.ledger.compile(seed)
    assert (doc.doc_id, "biopsy") in compiled.emphases
    # default config ignores emphases; enabling the lever changes the
    # training signature
    off_inputs = plain._variable_inputs(compiled)
    assert off_inputs["biopsy"][2] == ()
    emph = Engine(corpus, seed, EngineConfig(span_emphasis=True))
    emph.ledger.add_span_feedback(
        doc.doc_id, "biopsy", doc.reports[0].id, token.start, token.end, True
    )
    on_inputs = emph._variable_inputs(emph.ledger.compile(seed))
    assert on_inputs["biopsy"][2] != ()
