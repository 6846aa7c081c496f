"""HTTP/JSON service and CLI entry point.

Single-session server: one active cell, one visited set, one word-tree
filter. All endpoints live under /api/*; static UI assets, when built, are
served at /. Error responses always carry {"code", "message"}.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import click
import uvicorn
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import errors
from .corpus import REPORT_SEPARATOR, load_boilerplate_patterns, load_corpus, load_seed_labels
from .engine import Engine, EngineConfig
from .feedback import FeedbackKind, FeedbackStatus
from .learner import PredictedClass, top_terms, document_indicators, variable_distribution
from .wordtree import WordTree, build_tree, document_filter, drill_down, tree_payload

SORT_TOKENS = ("corpus", "prob_asc", "prob_desc")

STATUS_BY_CODE = {
    "malformed_corpus": 400,
    "empty_record": 400,
    "invalid_spec": 400,
    "empty_model": 400,
    "overlap_error": 400,
    "empty_query": 400,
    "node_not_in_tree": 400,
    "at_initial_state": 400,
    "feedback_error": 400,
    "unknown_document": 404,
    "unknown_report": 404,
    "unknown_variable": 404,
    "unknown_feedback": 404,
    "no_token_in_span": 400,
    "empty_tree": 400,
    "empty_phrase": 400,
    "not_pending": 409,
    "unresolved_conflicts": 409,
    "busy": 429,
}


@dataclass
class SessionState:
    active: tuple[str, str]
    visited: set[tuple[str, str]] = field(default_factory=set)
    tree: Optional[WordTree] = None
    filter_query: Optional[str] = None
    sort_variable: Optional[str] = None
    sort_by_variable: dict[str, str] = field(default_factory=dict)  # variable -> order

    @property
    def sort_order(self) -> str:
        if self.sort_variable is None:
            return "corpus"
        return self.sort_by_variable.get(self.sort_variable, "corpus")


def _error_response(exc: errors.TextLoopError) -> JSONResponse:
    status = STATUS_BY_CODE.get(exc.code, 400)
    body = {"code": exc.code, "message": exc.message}
    if isinstance(exc, errors.UnresolvedConflicts):
        body["conflicts"] = [c.to_dict() for c in exc.conflicts]
    return JSONResponse(status_code=status, content=body)


def create_app(engine: Engine, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="textloop", version="0.1.0")
    corpus = engine.corpus
    session = SessionState(active=(corpus.documents[0].doc_id, corpus.variables[0]))

    @app.exception_handler(errors.TextLoopError)
    async def handle_domain_error(request: Request, exc: errors.TextLoopError):
        return _error_response(exc)

    @app.exception_handler(Exception)
    async def handle_unexpected(request: Request, exc: Exception):
        return JSONResponse(
            status_code=500, content={"code": "internal", "message": str(exc)}
        )

    def bad_request(message: str) -> JSONResponse:
        return JSONResponse(
            status_code=400, content={"code": "bad_request", "message": message}
        )

    def check_variable(variable: str) -> None:
        if variable not in corpus.variables:
            raise errors.UnknownVariable(f"unknown variable {variable!r}")

    def filtered_doc_ids(filter_token: str) -> list[str]:
        if filter_token == "none" or session.tree is None:
            return list(corpus.doc_ids())
        return document_filter(session.tree)

    def ordered_rows(table, doc_ids: list[str], variable: str, order: str) -> list[str]:
        if order == "corpus":
            return doc_ids
        keyed = []
        unknown = []
        for doc_id in doc_ids:
            pred = table[(doc_id, variable)]
            if pred.cls is PredictedClass.UNKNOWN:
                unknown.append(doc_id)
            else:
                keyed.append((pred.probability, doc_id))
        reverse = order == "prob_desc"
        index = {d: i for i, d in enumerate(corpus.doc_ids())}
        keyed.sort(key=lambda pair: (-pair[0] if reverse else pair[0], index[pair[1]]))
        return [doc_id for _, doc_id in keyed] + unknown

    # -- state and grid --------------------------------------------------

    @app.get("/api/state")
    def get_state():
        return {
            "variables": list(corpus.variables),
            "n_documents": len(corpus.documents),
            "active": {"doc_id": session.active[0], "variable": session.active[1]},
            "filter": None
            if session.tree is None
            else {
                "query": session.filter_query,
                "root": list(session.tree.root_phrase),
                "doc_ids": filtered_doc_ids("active"),
            },
            "pending_feedback": len(engine.ledger.pending_items()),
            "conflicts": [c.to_dict() for c in engine.ledger.detect_conflicts()],
            "last_retrain": None
            if engine.last_diff is None
            else {
                "retrained_at": engine.last_diff.retrained_at,
                "changed": len(engine.last_diff.changes),
            },
        }

    @app.get("/api/grid")
    def get_grid(variable_sort: str = "", filter: str = "active"):
        if filter not in ("active", "none"):
            return bad_request(f"unknown filter token {filter!r}")
        sort_variable = session.sort_variable
        sort_order = session.sort_order
        if variable_sort:
            if ":" not in variable_sort:
                return bad_request("variable_sort must look like <variable>:<order>")
            sort_variable, _, sort_order = variable_sort.partition(":")
            check_variable(sort_variable)
            if sort_order not in SORT_TOKENS:
                return bad_request(f"unknown sort token {sort_order!r}")
            session.sort_variable = sort_variable
            session.sort_by_variable[sort_variable] = sort_order
        # one table reference for the whole response: a concurrent retrain
        # swap must never mix pre- and post-retrain cells
        table = engine.predictions
        doc_ids = filtered_doc_ids(filter)
        order_variable = sort_variable or corpus.variables[0]
        rows_order = ordered_rows(table, doc_ids, order_variable, sort_order)

        changed = (
            engine.last_diff.changed_cells if engine.last_diff is not None else frozenset()
        )
        skew = {}
        for variable in corpus.variables:
            n_true, n_false, n_unknown = variable_distribution(table, variable, doc_ids)
            skew[variable] = {"true": n_true, "false": n_false, "unknown": n_unknown}
        rows = []
        for doc_id in rows_order:
            cells = []
            for variable in corpus.variables:
                pred = table[(doc_id, variable)]
                cells.append(
                    {
                        "variable": variable,
                        "class": pred.cls.value,
                        "probability": None
                        if pred.cls is PredictedClass.UNKNOWN
                        else pred.probability,
                        "visited": (doc_id, variable) in session.visited,
                        "changed_last_retrain": (doc_id, variable) in changed,
                    }
                )
            rows.append({"doc_id": doc_id, "cells": cells})
        return {
            "variables": list(corpus.variables),
            "skew": skew,
            "rows": rows,
            "sort": {"variable": sort_variable, "order": sort_order},
            "filter": {"applied": filter == "active" and session.tree is not None},
        }

    # -- document ---------------------------------------------------------

    @app.get("/api/document/{doc_id}")
    def get_document(doc_id: str, variable: str = ""):
        if not corpus.has_document(doc_id):
            raise errors.UnknownDocument(f"unknown document {doc_id!r}")
        variable = variable or session.active[1]
        check_variable(variable)
        document = corpus.document(doc_id)

        boilerplate_by_report: dict[str, list[tuple[int, int]]] = {
            r.id: [] for r in document.reports
        }
        base = 0
        for report in document.reports:
            lo, hi = base, base + len(report.text)
            for b_start, b_end in document.boilerplate:
                if b_start >= lo and b_end <= hi:
                    boilerplate_by_report[report.id].append((b_start - base, b_end - base))
            base = hi + len(REPORT_SEPARATOR)

        model = engine.model(variable)
        indicators = []
        if not model.is_null:
            for term_weight, spans in document_indicators(model, document):
                indicators.append(
                    {
                        "term": term_weight.term,
                        "weight": term_weight.weight,
                        "polarity": term_weight.polarity,
                        "spans": [
                            {"report_id": r, "start": s, "end": e} for r, s, e in spans
                        ],
                        "first": {
                            "report_id": spans[0][0],
                            "start": spans[0][1],
                            "end": spans[0][2],
                        },
                    }
                )
        present = {ind["term"] for ind in indicators}
        top = []
        if not model.is_null:
            pos, neg = top_terms(model, 25)
            for tw in pos + neg:
                top.append(
                    {
                        "term": tw.term,
                        "weight": tw.weight,
                        "polarity": tw.polarity,
                        "present": tw.term in present,
                    }
                )
        return {
            "doc_id": doc_id,
            "variable": variable,
            "reports": [
                {
                    "report_id": r.id,
                    "kind": r.kind.value,
                    "text": r.text,
                    "boilerplate": [
                        {"start": s, "end": e} for s, e in boilerplate_by_report[r.id]
                    ],
                }
                for r in document.reports
            ],
            "indicators": indicators,
            "top_terms": top,
        }

    # -- statistics ---------------------------------------------------------

    @app.get("/api/stats")
    def get_stats(variable: str = "", filter: str = "active"):
        if filter not in ("active", "none"):
            return bad_request(f"unknown filter token {filter!r}")
        variable = variable or session.active[1]
        check_variable(variable)
        doc_ids = filtered_doc_ids(filter)
        n_true, n_false, n_unknown = variable_distribution(
            engine.predictions, variable, doc_ids
        )
        model = engine.model(variable)
        top_true = []
        top_false = []
        if not model.is_null:
            pos, neg = top_terms(model, 25)
            top_true = [{"term": t.term, "weight": t.weight} for t in pos]
            top_false = [{"term": t.term, "weight": t.weight} for t in neg]
        return {
            "variable": variable,
            "histogram": {"true": n_true, "false": n_false, "unknown": n_unknown},
            "n_documents": len(doc_ids),
            "top_true": top_true,
            "top_false": top_false,
        }

    # -- word tree ---------------------------------------------------------

    @app.get("/api/wordtree")
    def get_wordtree(request: Request, q: str = "", variable: str = ""):
        variable = variable or session.active[1]
        check_variable(variable)
        tree = build_tree(corpus, q)
        for step in request.query_params.getlist("drill"):
            side, _, token = step.partition(":")
            if side not in ("f", "b", "forward", "backward") or not token:
                return bad_request(f"bad drill step {step!r}; use f:<token> or b:<token>")
            direction = "forward" if side in ("f", "forward") else "backward"
            tree = drill_down(tree, direction, token)
        session.tree = tree
        session.filter_query = q
        return tree_payload(tree, engine.predictions, variable)

    @app.delete("/api/filter")
    def delete_filter():
        session.tree = None
        session.filter_query = None
        return {"filter": None}

    # -- feedback ------------------------------------------------------------

    @app.post("/api/feedback", status_code=201)
    def post_feedback(body: dict):
        kind = body.get("kind")
        variable = body.get("variable", "")
        ledger = engine.ledger
        if kind == FeedbackKind.DOCUMENT_LABEL.value:
            item = ledger.add_document_label(
                body.get("doc_id", ""), variable, bool(body.get("target_class"))
            )
        elif kind == FeedbackKind.SPAN_HIGHLIGHT.value:
            span = body.get("span") or {}
            item = ledger.add_span_feedback(
                body.get("doc_id", ""),
                variable,
                span.get("report_id", ""),
                int(span.get("start", 0)),
                int(span.get("end", 0)),
                bool(body.get("target_class")),
            )
        elif kind == FeedbackKind.PHRASE_LABEL.value:
            if "query" in body:
                tree = build_tree(corpus, body["query"])
                for step in body.get("drill", []):
                    side, _, token = step.partition(":")
                    direction = "forward" if side in ("f", "forward") else "backward"
                    tree = drill_down(tree, direction, token)
            else:
                tree = session.tree
                if tree is None:
                    raise errors.EmptyTree("no word tree active in this session")
            item = ledger.add_phrase_feedback(tree, variable, bool(body.get("target_class")))
        elif kind == FeedbackKind.NEITHER_TERM.value:
            item = ledger.add_neither_feedback(body.get("phrase", ""), variable)
        else:
            return bad_request(f"unknown feedback kind {kind!r}")
        return {
            "item": item.to_dict(),
            "conflicts": [c.to_dict() for c in ledger.detect_conflicts()],
        }

    @app.post("/api/feedback/{feedback_id}/resolve")
    def resolve_feedback(feedback_id: int, body: dict):
        action = body.get("action")
        ledger = engine.ledger
        if action == "delete":
            item = ledger.delete(feedback_id)
        elif action == "edit":
            item = ledger.edit(feedback_id, bool(body.get("target_class")))
        elif action == "confirm_override":
            item = ledger.confirm_override(feedback_id)
        else:
            return bad_request(f"unknown resolve action {action!r}")
        return {
            "item": item.to_dict(),
            "conflicts": [c.to_dict() for c in ledger.detect_conflicts()],
        }

    # -- retrain ---------------------------------------------------------------

    @app.get("/api/retrain")
    def get_retrain():
        ledger = engine.ledger
        return {
            "items": [i.to_dict() for i in ledger.items],
            "pending": len(ledger.pending_items()),
            "conflicts": [c.to_dict() for c in ledger.detect_conflicts()],
            "last_diff": None if engine.last_diff is None else engine.last_diff.to_dict(),
        }

    @app.post("/api/retrain")
    def post_retrain():
        diff = engine.retrain()
        return {
            **diff.to_dict(),
            "pending_after": len(engine.ledger.pending_items()),
        }

    # -- review workflow -----------------------------------------------------

    @app.post("/api/visit")
    def post_visit(body: dict):
        doc_id = body.get("doc_id", "")
        variable = body.get("variable", "")
        if not corpus.has_document(doc_id):
            raise errors.UnknownDocument(f"unknown document {doc_id!r}")
        check_variable(variable)
        session.visited.add((doc_id, variable))
        session.active = (doc_id, variable)
        return {
            "active": {"doc_id": doc_id, "variable": variable},
            "visited_count": len(session.visited),
        }

    @app.get("/api/next")
    def get_next():
        variable = session.active[1]
        table = engine.predictions
        doc_ids = filtered_doc_ids("active")
        if session.sort_order in ("prob_asc", "prob_desc"):
            # review priority: least confident first
            candidates = sorted(
                (d for d in doc_ids if (d, variable) not in session.visited),
                key=lambda d: (
                    abs(table[(d, variable)].probability - 0.5),
                    doc_ids.index(d),
                ),
            )
        else:
            candidates = [d for d in doc_ids if (d, variable) not in session.visited]
        if not candidates:
            return JSONResponse(
                status_code=404,
                content={"code": "all_visited", "message": "every cell has been visited"},
            )
        return {"doc_id": candidates[0], "variable": variable}

    # -- evaluation ---------------------------------------------------------

    @app.get("/api/evaluate")
    def get_evaluate(holdout: str = ""):
        if not holdout or not Path(holdout).exists():
            return bad_request(f"holdout file not found: {holdout!r}")
        metrics = engine.evaluate_holdout_file(holdout)
        return {"variables": {v: m.to_dict() for v, m in metrics.items()}}

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


@click.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--seed-labels", "seed_path", required=True, type=click.Path())
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", "data_dir", required=True, type=click.Path())
@click.option("--boilerplate", "boilerplate_path", default=None, type=click.Path())
@click.option("--tau", default=0.1, show_default=True, type=float)
@click.option("--c", "c_value", default=1.0, show_default=True, type=float)
@click.option("--ui-dir", "ui_dir", default=None, type=click.Path())
def main(corpus_path, seed_path, port, host, data_dir, boilerplate_path, tau, c_value, ui_dir):
    """Serve the review/feedback/retrain API (and UI assets when built)."""
    try:
        patterns = (
            load_boilerplate_patterns(boilerplate_path) if boilerplate_path else ()
        )
        corpus = load_corpus(corpus_path, boilerplate_patterns=patterns)
        seed_labels = load_seed_labels(seed_path, corpus)
    except (errors.TextLoopError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    engine = Engine(
        corpus,
        seed_labels,
        EngineConfig(tau=tau, c=c_value),
        data_dir=data_dir,
    )
    if ui_dir is None:
        default_ui = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = str(default_ui) if default_ui.is_dir() else None
    app = create_app(engine, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
