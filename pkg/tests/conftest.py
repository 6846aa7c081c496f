from __future__ import annotations

from contextlib import contextmanager

import pytest

from textloop.corpus import Corpus, build_corpus
from textloop.synth import SynthSpec, demo_variables, generate_synthetic_corpus

ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


@contextmanager
def criterion(name: str):
    """Record a pass/fail line for an acceptance criterion."""
    try:
        yield
    except BaseException:
        ACCEPTANCE_RESULTS.append((name, "FAIL"))
        raise
    ACCEPTANCE_RESULTS.append((name, "PASS"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, status in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{status}] {name}")


def make_corpus(records, variables=("biopsy",)) -> Corpus:
    """Corpus from [(patient_id, [(report_id, kind, text), ...]), ...]."""
    data = {
        "variables": list(variables),
        "records": [
            {
                "patient_id": pid,
                "reports": [
                    {"id": rid, "kind": kind, "text": text} for rid, kind, text in reports
                ],
            }
            for pid, reports in records
        ],
    }
    return build_corpus(data)


@pytest.fixture
def tiny_corpus() -> Corpus:
    return make_corpus(
        [
            ("d1", [("d1-r1", "endoscopy", "Hot biopsy done. Prep was good.")]),
            ("d2", [("d2-r1", "endoscopy", "Cold biopsy taken today.")]),
            ("d3", [("d3-r1", "endoscopy", "No findings. Normal exam throughout.")]),
            ("d4", [("d4-r1", "endoscopy", "Prep was poor. Repeat advised.")]),
        ],
        variables=("biopsy", "polyp"),
    )


@pytest.fixture(scope="session")
def full_scale():
    """280 documents, 14 variables, seed 7 — shared across the suite."""
    spec = SynthSpec(n_documents=280, variables=demo_variables(14), seed=7)
    corpus, gold = generate_synthetic_corpus(spec)
    return corpus, gold


@pytest.fixture(scope="session")
def small_synth():
    spec = SynthSpec(n_documents=60, variables=demo_variables(3), seed=11)
    corpus, gold = generate_synthetic_corpus(spec)
    return corpus, gold
