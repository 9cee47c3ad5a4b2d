"""Operator command line.

Every command is a thin wrapper over one module call. Exit codes: 0
success, 1 data or config problem, 2 provider failure. Failures print a
single JSON line {"code", "message", "detail"} on stderr so scripts can
parse them.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from lexqa.config import AppConfig, load_config, parse_strategy
from lexqa.embedding import EmbedderRef
from lexqa.engine import Engine
from lexqa.errors import (
    AllProvidersFailed,
    EmbeddingFailure,
    EngineError,
    RemoteUnavailable,
    SelectorFailure,
)
from lexqa.evaluation import EvalVariant, load_dataset, render_summary, run_eval, write_report
from lexqa.kb import load_kb
from lexqa.retrieval import build_index, save_index_cache
from lexqa.review import Approve, Reject, item_to_dict

_PROVIDER_ERRORS = (AllProvidersFailed, SelectorFailure, RemoteUnavailable, EmbeddingFailure)


def _fail(exc: EngineError) -> None:
    code = 2 if isinstance(exc, _PROVIDER_ERRORS) else 1
    line = {"code": exc.code, "message": str(exc), "detail": None}
    click.echo(json.dumps(line, ensure_ascii=False), err=True)
    sys.exit(code)


def _load(config_path: str) -> AppConfig:
    return load_config(config_path)


@click.group()
def main() -> None:
    """Legal QA engine: knowledge base, routing, review, evaluation."""


@main.group()
def kb() -> None:
    """Knowledge base and index maintenance."""


@kb.command("build")
@click.option("--kb", "kb_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--strategy", default="q", help="q | qa | qc (or the long form)")
@click.option("--embedder", "embedder_kind", default="local", type=click.Choice(["local", "remote"]))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="required for --embedder remote (supplies endpoint and model)")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def kb_build(kb_path: str, strategy: str, embedder_kind: str, config_path: str | None, out_path: str) -> None:
    """Embed every entry and write the index cache."""
    try:
        strat = parse_strategy(strategy)
        if embedder_kind == "remote":
            if config_path is None:
                raise click.ClickException("--embedder remote requires --config")
            embedder = _load(config_path).engine.embedder
        else:
            embedder = EmbedderRef.local()
        collection = load_kb(kb_path)
        index = build_index(collection, strat, embedder)
        save_index_cache(index, out_path)
    except EngineError as exc:
        _fail(exc)
        return
    click.echo(f"{len(index)} rows")
    click.echo(f"fingerprint: {index.embedder_fingerprint}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="emit the full answer record including the trace")
@click.argument("question")
def query(config_path: str, as_json: bool, question: str) -> None:
    """Answer one question."""
    try:
        engine = Engine.load(_load(config_path))
        outcome, trace_id, item = engine.answer(question)
    except EngineError as exc:
        _fail(exc)
        return
    if as_json:
        click.echo(
            json.dumps(
                {
                    "answer": outcome.text,
                    "path": outcome.path_name,
                    "best_score": outcome.best_score(),
                    "trace_id": trace_id,
                    "enqueued_item_id": item.item_id if item else None,
                    "trace": outcome.trace,
                },
                ensure_ascii=False,
                sort_keys=True,
            )
        )
        return
    click.echo(f"path: {outcome.path_name}")
    best = outcome.best_score()
    click.echo(f"best_score: {'-' if best is None else f'{best:.4f}'}")
    click.echo(f"answer: {outcome.text}")
    if item is not None:
        click.echo(f"enqueued for review as item {item.item_id}")


@main.command("eval")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--variant", required=True, type=click.Choice([v.value for v in EvalVariant]))
@click.option("--fold", required=True, type=click.IntRange(0, 2))
@click.option("--seed", required=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def eval_cmd(config_path: str, dataset_path: str, variant: str, fold: int, seed: int, out_path: str) -> None:
    """Score one system variant over one fold and write the report."""
    try:
        config = _load(config_path)
        pairs = load_dataset(dataset_path)
        report = run_eval(
            EvalVariant(variant),
            pairs,
            fold,
            seed,
            config.engine,
            cache_dir=config.eval_cache_dir,
        )
        write_report(report, out_path)
    except EngineError as exc:
        _fail(exc)
        return
    click.echo(render_summary(report))


@main.group()
def review() -> None:
    """Review queue operations."""


@review.command("list")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True)
def review_list(config_path: str, as_json: bool) -> None:
    """Show pending items, oldest first."""
    try:
        engine = Engine.load(_load(config_path))
        items = engine.pending_items()
    except EngineError as exc:
        _fail(exc)
        return
    if as_json:
        click.echo(json.dumps([item_to_dict(i) for i in items], ensure_ascii=False, sort_keys=True))
        return
    if not items:
        click.echo("no pending items")
        return
    click.echo(f"{'id':>4} {'created_at':<25} {'score':>6} question")
    for item in items:
        score = item.source.final_score if hasattr(item.source, "final_score") else float("nan")
        question = item.question if len(item.question) <= 50 else item.question[:49] + "…"
        click.echo(f"{item.item_id:>4} {item.created_at:<25} {score:>6.3f} {question}")


@review.command("approve")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--reviewer", default="cli", help="opaque reviewer id recorded in provenance")
@click.argument("item_id", type=int)
def review_approve(config_path: str, reviewer: str, item_id: int) -> None:
    """Write the item back into the knowledge base."""
    try:
        engine = Engine.load(_load(config_path))
        outcome = engine.decide_item(item_id, Approve(), reviewer)
    except EngineError as exc:
        _fail(exc)
        return
    click.echo(f"approved item {item_id} -> kb entry {outcome.entry_id}")


@review.command("reject")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--reviewer", default="cli")
@click.option("--reason", default=None, help="required; recorded in the audit log")
@click.argument("item_id", type=int)
def review_reject(config_path: str, reviewer: str, reason: str | None, item_id: int) -> None:
    """Reject the item; the knowledge base is not touched."""
    if reason is None or not reason.strip():
        click.echo(
            json.dumps({"code": "invalid_decision", "message": "reject requires --reason", "detail": None}),
            err=True,
        )
        sys.exit(1)
    try:
        engine = Engine.load(_load(config_path))
        engine.decide_item(item_id, Reject(reason=reason), reviewer)
    except EngineError as exc:
        _fail(exc)
        return
    click.echo(f"rejected item {item_id}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
def serve(config_path: str) -> None:
    """Run the HTTP service."""
    import uvicorn

    from lexqa.service import create_app

    try:
        config = _load(config_path)
        app = create_app(Engine.load(config))
    except EngineError as exc:
        _fail(exc)
        return
    uvicorn.run(app, host=config.listen_host, port=config.listen_port, log_level="warning")


if __name__ == "__main__":
    main()
