"""Composition root: loads every store from an AppConfig and exposes the
operations the service and CLI share.

Reads never block: search walks immutable array snapshots, so a reader
that raced a write sees either the old or the new index, both valid.
All mutation (enqueue, decide) funnels through one lock, and the index
cache file is refreshed after every approved write-back so a restart
starts warm.
"""

from __future__ import annotations

import logging
import threading
import uuid
from typing import Any

from lexqa.config import AppConfig
from lexqa.embedding import embed_text
from lexqa.errors import CorruptCache, FingerprintMismatch
from lexqa.gateway import Gateway
from lexqa.kb import KbCollection, load_kb
from lexqa.orchestrator import AnswerOutcome, route
from lexqa.records import append_record, read_records
from lexqa.retrieval import (
    VectorIndex,
    add_to_index,
    build_index,
    load_index_cache,
    save_index_cache,
    search,
)
from lexqa.review import (
    Decision,
    DecisionOutcome,
    ReviewItem,
    ReviewQueue,
    decide,
    list_pending,
    load_queue,
    maybe_enqueue,
)

logger = logging.getLogger(__name__)


def _load_or_build_index(collection: KbCollection, config: AppConfig) -> VectorIndex:
    """Reload the cache when it is usable, topping up rows for entries
    added since it was written; rebuild from scratch otherwise."""
    engine_cfg = config.engine
    cache = config.cache_path
    index: VectorIndex | None = None
    if cache is not None and cache.exists():
        try:
            index = load_index_cache(cache, expected_fingerprint=engine_cfg.embedder.fingerprint)
        except (CorruptCache, FingerprintMismatch) as exc:
            logger.warning("index cache %s unusable (%s); rebuilding", cache, exc)
        if index is not None and index.strategy != engine_cfg.strategy:
            logger.warning("index cache %s built with strategy %s; rebuilding", cache, index.strategy.value)
            index = None
        if index is not None:
            known = set(index.entry_ids)
            if known - set(collection.by_id):
                logger.warning("index cache %s has rows for unknown entries; rebuilding", cache)
                index = None
        if index is not None:
            missing = [e for e in collection.entries if e.id not in known]
            for entry in missing:
                add_to_index(index, entry, engine_cfg.embedder)
            if missing:
                save_index_cache(index, cache)
            return index
    index = build_index(collection, engine_cfg.strategy, engine_cfg.embedder)
    if cache is not None:
        save_index_cache(index, cache)
    return index


class Engine:
    def __init__(
        self,
        config: AppConfig,
        collection: KbCollection,
        index: VectorIndex,
        queue: ReviewQueue,
        gateway: Gateway | None = None,
    ):
        self.config = config
        self.collection = collection
        self.index = index
        self.queue = queue
        self.gateway = gateway or Gateway()
        self.write_lock = threading.Lock()
        self._traces: dict[str, dict[str, Any]] = {}
        if config.trace_path is not None and config.trace_path.exists():
            for _, obj in read_records(config.trace_path):
                self._traces[str(obj["trace_id"])] = obj

    @staticmethod
    def load(config: AppConfig, gateway: Gateway | None = None) -> Engine:
        collection = load_kb(config.kb_path)
        index = _load_or_build_index(collection, config)
        queue = load_queue(config.queue_path, config.audit_path)
        return Engine(config, collection, index, queue, gateway)

    def answer(self, question: str) -> tuple[AnswerOutcome, str, ReviewItem | None]:
        """Route one query, persist its trace, and run the enqueue rule."""
        outcome = route(question, self.index, self.collection, self.config.engine, self.gateway)
        trace_id = uuid.uuid4().hex
        record = {
            "trace_id": trace_id,
            "question": question,
            "answer": outcome.text,
            "path": outcome.path_name,
            "best_score": outcome.best_score(),
            "steps": outcome.trace,
        }
        self._traces[trace_id] = record
        if self.config.trace_path is not None:
            append_record(self.config.trace_path, record)
        with self.write_lock:
            item = maybe_enqueue(self.queue, outcome, question, self.config.engine)
        return outcome, trace_id, item

    def search_kb(self, question: str, k: int) -> list[dict[str, Any]]:
        query_vec = embed_text(question, self.config.engine.embedder)
        hits = search(self.index, query_vec, k)
        rows = []
        for hit in hits:
            entry = self.collection.get(hit.entry_id)
            if entry is None:
                continue
            rows.append(
                {
                    "entry_id": hit.entry_id,
                    "score": hit.score,
                    "question": entry.question,
                    "answer": entry.answer,
                    "cause": entry.cause,
                }
            )
        return rows

    def pending_items(self) -> list[ReviewItem]:
        return list_pending(self.queue)

    def decide_item(self, item_id: int, decision: Decision, reviewer_id: str) -> DecisionOutcome:
        with self.write_lock:
            outcome = decide(
                self.queue,
                item_id,
                decision,
                reviewer_id,
                self.collection,
                self.index,
                self.config.engine.embedder,
            )
            if outcome.status == "approved" and self.config.cache_path is not None:
                # derived data: a failure here must not undo the decision
                try:
                    save_index_cache(self.index, self.config.cache_path)
                except OSError as exc:
                    logger.warning("could not refresh index cache: %s", exc)
        return outcome

    def get_trace(self, trace_id: str) -> dict[str, Any] | None:
        return self._traces.get(trace_id)

    def health(self) -> dict[str, Any]:
        return {
            "status": "ok",
            "kb_entries": len(self.collection),
            "index_rows": len(self.index),
            "embedder_fingerprint": self.config.engine.embedder.fingerprint,
        }
