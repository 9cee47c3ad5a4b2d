"""Shared test utilities: an independent search oracle, a builder that
scripts mock models through the public prompt builders, small fixture
writers, and a canned-response HTTP server for provider wire tests."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any

import numpy as np

from lexqa.embedding import EmbedderRef, IndexingStrategy, embed_entry, embed_text
from lexqa.evaluation import build_eval_judge_prompt
from lexqa.gateway import ModelRef, prompt_key
from lexqa.kb import KbCollection, KbEntry
from lexqa.orchestrator import build_baseline_prompt, build_rag_prompt
from lexqa.retrieval import RetrievalHit
from lexqa.selection import DIMENSIONS, build_judge_prompt


def brute_force_search(
    collection: KbCollection,
    strategy: IndexingStrategy,
    embedder: EmbedderRef,
    query: str,
    k: int,
) -> list[tuple[int, float]]:
    """Reference ranking: full cosine scan in float64, ordered by
    (score desc, entry id asc), one row per entry, truncated to k."""
    q64 = np.asarray(embed_text(query, embedder), dtype=np.float64)
    qn = np.linalg.norm(q64)
    scored = []
    for entry in collection.entries:
        v64 = np.asarray(embed_entry(entry, strategy, embedder), dtype=np.float64)
        score = float(np.dot(v64, q64) / (np.linalg.norm(v64) * qn))
        scored.append((entry.id, score))
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored[:k]


def dims_json(scores: tuple[float, ...]) -> str:
    return json.dumps(dict(zip(DIMENSIONS, scores)))


class ScriptBuilder:
    """Populate mock model scripts via the same prompt builders the engine
    uses, so a fixture never has to hard-code prompt text."""

    def __init__(self, templates=None):
        self.templates = templates

    def baseline_reply(self, model: ModelRef, query: str, reply: str) -> None:
        prompt = build_baseline_prompt(query, self.templates)
        model.script[prompt_key(prompt)] = reply

    def rag_reply(
        self,
        model: ModelRef,
        query: str,
        entry_ids: list[int],
        collection: KbCollection,
        reply: str,
    ) -> None:
        hits = [RetrievalHit(entry_id=i, score=0.0) for i in entry_ids]
        prompt = build_rag_prompt(query, hits, collection, self.templates)
        model.script[prompt_key(prompt)] = reply

    def selection_judge(
        self,
        judge: ModelRef,
        query: str,
        candidate_text: str,
        scores: tuple[float, ...],
        context: list[KbEntry] | None = None,
        reply: str | None = None,
    ) -> None:
        prompt = build_judge_prompt(query, candidate_text, context=context, templates=self.templates)
        judge.script[prompt_key(prompt)] = reply if reply is not None else dims_json(scores)

    def eval_judge(
        self,
        judge: ModelRef,
        question: str,
        reference: str,
        candidate: str,
        scores: tuple[float, ...],
        reply: str | None = None,
    ) -> None:
        prompt = build_eval_judge_prompt(question, reference, candidate, self.templates)
        judge.script[prompt_key(prompt)] = reply if reply is not None else dims_json(scores)


def scripted_models() -> dict[str, ModelRef]:
    """Fresh mock refs in the shape every fixture config uses."""
    return {
        "rag": ModelRef.mock("rag-model"),
        "m1": ModelRef.mock("m1"),
        "m2": ModelRef.mock("m2"),
        "m3": ModelRef.mock("m3"),
        "judge": ModelRef.mock("judge"),
    }


def script_rag_hit(
    models: dict[str, ModelRef],
    query: str,
    collection: KbCollection,
    reply: str,
    strategy: IndexingStrategy = IndexingStrategy.QUESTION_ONLY,
    embedder: EmbedderRef | None = None,
    top_k: int = 3,
) -> None:
    """Script the RAG model for the prompt the engine will build for `query`."""
    embedder = embedder or EmbedderRef.local()
    ids = [e for e, _ in brute_force_search(collection, strategy, embedder, query, top_k)]
    ScriptBuilder().rag_reply(models["rag"], query, ids, collection, reply)


def script_promotable_miss(models: dict[str, ModelRef], query: str, answer: str) -> None:
    """Script an ensemble round where `answer` wins with judge score 0.95."""
    builder = ScriptBuilder()
    builder.baseline_reply(models["m1"], query, answer)
    builder.baseline_reply(models["m2"], query, "不完整的回答")
    builder.baseline_reply(models["m3"], query, "另一个不完整的回答")
    builder.selection_judge(models["judge"], query, answer, (0.95,) * 5)
    builder.selection_judge(models["judge"], query, "不完整的回答", (0.3,) * 5)
    builder.selection_judge(models["judge"], query, "另一个不完整的回答", (0.3,) * 5)


def write_config_dir(
    tmp_path: Path,
    models: dict[str, ModelRef],
    rows: list[dict[str, Any]],
    **overrides: Any,
) -> Path:
    """Materialize a runnable config directory: KB file, one script file per
    mock model, and a config.json wiring them together."""
    write_jsonl(tmp_path / "kb.jsonl", rows, header_comment="seed knowledge base")
    for key, model in models.items():
        (tmp_path / f"{key}.json").write_text(
            json.dumps(model.script, ensure_ascii=False), encoding="utf-8"
        )
    raw: dict[str, Any] = {
        "kb_path": "kb.jsonl",
        "queue_path": "queue.jsonl",
        "audit_path": "audit.jsonl",
        "cache_path": "index.bin",
        "trace_path": "traces.jsonl",
        "eval_cache_dir": "eval_cache",
        "strategy": "q",
        "embedder": {"kind": "local"},
        "rag_model": {"id": "rag-model", "kind": "mock", "script_path": "rag.json"},
        "ensemble_models": [
            {"id": "m1", "kind": "mock", "script_path": "m1.json"},
            {"id": "m2", "kind": "mock", "script_path": "m2.json"},
            {"id": "m3", "kind": "mock", "script_path": "m3.json"},
        ],
        "selector_model": {"id": "judge", "kind": "mock", "script_path": "judge.json"},
    }
    raw.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw, ensure_ascii=False, indent=2), encoding="utf-8")
    return path


def write_jsonl(path: Path, rows: list[dict[str, Any]], header_comment: str | None = None) -> Path:
    lines = []
    if header_comment:
        lines.append(f"# {header_comment}")
    lines.extend(json.dumps(row, ensure_ascii=False) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def kb_row(entry_id: int, question: str, answer: str, cause: str = "", candidate: str | None = None) -> dict[str, Any]:
    row: dict[str, Any] = {
        "id": entry_id,
        "question": question,
        "answer": answer,
        "cause": cause,
        "provenance": {"kind": "seed"},
    }
    if candidate is not None:
        row["candidate_answer"] = candidate
    return row


class CannedHandler(BaseHTTPRequestHandler):
    """POST handler that replays queued (status, body) responses and
    records every request body for assertions."""

    server: "CannedServer"

    def do_POST(self):  # noqa: N802 - http.server API
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length)
        with self.server.lock:
            self.server.requests.append(
                {
                    "path": self.path,
                    "headers": dict(self.headers),
                    "body": json.loads(body) if body else None,
                }
            )
            status, payload, delay = (
                self.server.responses.pop(0) if self.server.responses else (200, self.server.default, 0.0)
            )
        if delay:
            threading.Event().wait(delay)
        data = json.dumps(payload).encode("utf-8") if not isinstance(payload, bytes) else payload
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):  # quiet
        pass


class CannedServer(ThreadingHTTPServer):
    def __init__(self):
        super().__init__(("127.0.0.1", 0), CannedHandler)
        self.lock = threading.Lock()
        self.requests: list[dict[str, Any]] = []
        self.responses: list[tuple[int, Any, float]] = []
        self.default: Any = {}

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.server_address[1]}"

    def queue(self, status: int, payload: Any, delay: float = 0.0) -> None:
        self.responses.append((status, payload, delay))


class canned_server:
    """Context manager running a CannedServer on a daemon thread."""

    def __enter__(self) -> CannedServer:
        self.server = CannedServer()
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()
        return self.server

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()
        self.thread.join(timeout=5)
        return False
