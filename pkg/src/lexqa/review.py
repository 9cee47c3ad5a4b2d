"""Human-in-the-loop review queue.

High-scoring ensemble answers wait here for a reviewer. Approval writes
the QA pair back into the knowledge base and the live index in one
atomic step, so the next identical query is answered from the KB.
Every state change lands in an append-only audit log.

Queue and audit files reuse the KB's line-delimited record format. The
queue file is an event log (item records plus decision records) replayed
at load time; nothing in it is ever rewritten.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from lexqa.embedding import EmbedderRef
from lexqa.errors import (
    AlreadyDecided,
    ItemNotFound,
    MalformedRecord,
    StorageFailure,
)
from lexqa.kb import KbCollection, WrittenBack, append_entry
from lexqa.orchestrator import AnswerOutcome, EngineConfig, EnsemblePath
from lexqa.records import append_record, read_records, truncate_to
from lexqa.retrieval import VectorIndex, add_to_index

# statute citation in 《...》 with an optional article number
_CITATION_RE = re.compile(r"《[^《》]+》(?:第[零一二三四五六七八九十百千万0-9]+条)?")


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def extract_cited_statutes(text: str) -> str:
    """Join the statute citations found in `text`; empty when there are none.

    The KB schema wants a cause for every entry but generated answers only
    sometimes cite one. Missing causes stay empty for the reviewer to fill.
    """
    seen: list[str] = []
    for match in _CITATION_RE.findall(text):
        if match not in seen:
            seen.append(match)
    return "；".join(seen)


@dataclass(frozen=True)
class Pending:
    pass


@dataclass(frozen=True)
class Approved:
    reviewer_id: str
    decided_at: str


@dataclass(frozen=True)
class Rejected:
    reviewer_id: str
    reason: str
    decided_at: str


Status = Pending | Approved | Rejected


@dataclass(frozen=True)
class RagSource:
    """Source marker kept for completeness; RAG answers are never enqueued."""


@dataclass(frozen=True)
class EnsembleSource:
    winner_model: str
    final_score: float
    # per-dimension judge scores and the weights behind final_score, so a
    # client can re-derive the weighted sum without another judge call
    dimension_scores: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()


Source = RagSource | EnsembleSource


@dataclass
class ReviewItem:
    item_id: int
    question: str
    answer: str
    cause: str
    source: Source
    created_at: str
    status: Status = field(default_factory=Pending)

    @property
    def pending(self) -> bool:
        return isinstance(self.status, Pending)


@dataclass(frozen=True)
class Approve:
    pass


@dataclass(frozen=True)
class Reject:
    reason: str


Decision = Approve | Reject


@dataclass(frozen=True)
class DecisionOutcome:
    status: str  # "approved" | "rejected"
    item_id: int
    entry_id: int | None = None


@dataclass
class ReviewQueue:
    queue_path: Path
    audit_path: Path
    items: dict[int, ReviewItem] = field(default_factory=dict)
    order: list[int] = field(default_factory=list)
    next_seq: int = 0

    def next_item_id(self) -> int:
        return max(self.items) + 1 if self.items else 0

    def get(self, item_id: int) -> ReviewItem | None:
        return self.items.get(item_id)


def _source_to_dict(source: Source) -> dict[str, Any]:
    if isinstance(source, EnsembleSource):
        return {
            "kind": "ensemble",
            "winner_model": source.winner_model,
            "final_score": source.final_score,
            "dimension_scores": list(source.dimension_scores),
            "weights": list(source.weights),
        }
    return {"kind": "rag"}


def _source_from_dict(obj: Any) -> Source:
    if not isinstance(obj, dict):
        raise ValueError("source must be an object")
    kind = obj.get("kind")
    if kind == "rag":
        return RagSource()
    if kind == "ensemble":
        return EnsembleSource(
            winner_model=str(obj["winner_model"]),
            final_score=float(obj["final_score"]),
            dimension_scores=tuple(float(v) for v in obj.get("dimension_scores", [])),
            weights=tuple(float(v) for v in obj.get("weights", [])),
        )
    raise ValueError(f"unknown source kind {kind!r}")


def item_to_dict(item: ReviewItem) -> dict[str, Any]:
    status: dict[str, Any]
    if isinstance(item.status, Approved):
        status = {
            "state": "approved",
            "reviewer_id": item.status.reviewer_id,
            "decided_at": item.status.decided_at,
        }
    elif isinstance(item.status, Rejected):
        status = {
            "state": "rejected",
            "reviewer_id": item.status.reviewer_id,
            "reason": item.status.reason,
            "decided_at": item.status.decided_at,
        }
    else:
        status = {"state": "pending"}
    return {
        "item_id": item.item_id,
        "question": item.question,
        "answer": item.answer,
        "cause": item.cause,
        "source": _source_to_dict(item.source),
        "created_at": item.created_at,
        "status": status,
    }


def load_queue(queue_path: str | Path, audit_path: str | Path) -> ReviewQueue:
    """Replay the queue event log; missing files mean an empty queue."""
    queue = ReviewQueue(queue_path=Path(queue_path), audit_path=Path(audit_path))
    if queue.queue_path.exists():
        for lineno, obj in read_records(queue.queue_path):
            try:
                _replay_event(queue, obj)
            except (ValueError, KeyError, TypeError) as exc:
                raise MalformedRecord(lineno, str(exc)) from exc
    queue.next_seq = _last_audit_seq(queue.audit_path) + 1
    return queue


def _replay_event(queue: ReviewQueue, obj: dict[str, Any]) -> None:
    kind = obj.get("kind")
    if kind == "item":
        item = ReviewItem(
            item_id=int(obj["item_id"]),
            question=str(obj["question"]),
            answer=str(obj["answer"]),
            cause=str(obj.get("cause", "")),
            source=_source_from_dict(obj["source"]),
            created_at=str(obj["created_at"]),
        )
        if item.item_id in queue.items:
            raise ValueError(f"duplicate item_id {item.item_id}")
        queue.items[item.item_id] = item
        queue.order.append(item.item_id)
        return
    if kind == "decision":
        item = queue.items.get(int(obj["item_id"]))
        if item is None:
            raise ValueError(f"decision for unknown item {obj['item_id']}")
        if not item.pending:
            raise ValueError(f"second decision for item {item.item_id}")
        state = obj.get("state")
        if state == "approved":
            item.status = Approved(str(obj["reviewer_id"]), str(obj["decided_at"]))
        elif state == "rejected":
            item.status = Rejected(
                str(obj["reviewer_id"]), str(obj.get("reason", "")), str(obj["decided_at"])
            )
        else:
            raise ValueError(f"unknown decision state {state!r}")
        return
    raise ValueError(f"unknown queue record kind {kind!r}")


def _last_audit_seq(audit_path: Path) -> int:
    last = -1
    if audit_path.exists():
        for _, obj in read_records(audit_path):
            seq = obj.get("seq")
            if not isinstance(seq, int) or seq <= last:
                raise StorageFailure(f"audit log sequence not strictly increasing at {seq!r}")
            last = seq
    return last


def _append_audit(queue: ReviewQueue, actor: str, action: str, item_id: int, detail: dict[str, Any]) -> int:
    offset = append_record(
        queue.audit_path,
        {
            "seq": queue.next_seq,
            "timestamp": _utcnow(),
            "actor": actor,
            "action": action,
            "item_id": item_id,
            "detail": detail,
        },
    )
    queue.next_seq += 1
    return offset


def maybe_enqueue(
    queue: ReviewQueue,
    outcome: AnswerOutcome,
    query: str,
    config: EngineConfig,
) -> ReviewItem | None:
    """Enqueue an ensemble answer whose final score clears the quality bar.

    RAG answers are never enqueued: their supporting knowledge is already
    in the KB, so writing them back would only duplicate entries.
    """
    if not isinstance(outcome.path, EnsemblePath):
        return None
    winner = outcome.winner()
    if winner is None or winner.final < config.enqueue_threshold:
        return None
    if not outcome.text:
        return None
    item = ReviewItem(
        item_id=queue.next_item_id(),
        question=query,
        answer=outcome.text,
        cause=extract_cited_statutes(outcome.text),
        source=EnsembleSource(
            winner_model=outcome.path.winner_model,
            final_score=winner.final,
            dimension_scores=winner.scores.as_tuple(),
            weights=config.judge_weights.w,
        ),
        created_at=_utcnow(),
    )
    record = dict(item_to_dict(item), kind="item")
    del record["status"]
    append_record(queue.queue_path, record)
    queue.items[item.item_id] = item
    queue.order.append(item.item_id)
    _append_audit(
        queue,
        actor="engine",
        action="enqueue",
        item_id=item.item_id,
        detail={"final_score": winner.final, "winner_model": outcome.path.winner_model},
    )
    return item


def list_pending(queue: ReviewQueue) -> list[ReviewItem]:
    return [queue.items[i] for i in queue.order if queue.items[i].pending]


def decide(
    queue: ReviewQueue,
    item_id: int,
    decision: Decision,
    reviewer_id: str,
    collection: KbCollection,
    index: VectorIndex,
    embedder: EmbedderRef,
) -> DecisionOutcome:
    """Apply one reviewer decision.

    Approve appends the QA pair to the KB (durably), adds the index row,
    marks the item, and writes the audit record, in that order. Any
    failure rolls every earlier step back by truncating the record files
    to their pre-call sizes and restoring the in-memory state, so a
    failed decide leaves no trace. Reject only flips the status.
    """
    item = queue.items.get(item_id)
    if item is None:
        raise ItemNotFound(f"no review item {item_id}")
    if not item.pending:
        raise AlreadyDecided(f"item {item_id} already decided")
    decided_at = _utcnow()

    queue_size = queue.queue_path.stat().st_size if queue.queue_path.exists() else 0
    audit_size = queue.audit_path.stat().st_size if queue.audit_path.exists() else 0
    seq_before = queue.next_seq

    if isinstance(decision, Reject):
        if not decision.reason.strip():
            raise ValueError("rejection requires a reason")
        try:
            append_record(
                queue.queue_path,
                {
                    "kind": "decision",
                    "item_id": item_id,
                    "state": "rejected",
                    "reviewer_id": reviewer_id,
                    "reason": decision.reason,
                    "decided_at": decided_at,
                },
            )
            item.status = Rejected(
                reviewer_id=reviewer_id, reason=decision.reason, decided_at=decided_at
            )
            _append_audit(queue, reviewer_id, "reject", item_id, {"reason": decision.reason})
        except BaseException:
            item.status = Pending()
            queue.next_seq = seq_before
            truncate_to(queue.queue_path, queue_size)
            truncate_to(queue.audit_path, audit_size)
            raise
        return DecisionOutcome(status="rejected", item_id=item_id)

    source_model = (
        item.source.winner_model if isinstance(item.source, EnsembleSource) else "rag"
    )
    kb_path = collection.path
    if kb_path is None:
        raise StorageFailure("collection has no backing file")
    kb_size = kb_path.stat().st_size if kb_path.exists() else 0
    index_vectors, index_ids = index.vectors, index.entry_ids

    entry_id: int | None = None
    try:
        entry_id = append_entry(
            collection,
            question=item.question,
            answer=item.answer,
            cause=item.cause,
            provenance=WrittenBack(
                reviewer_id=reviewer_id,
                source_model=source_model,
                approved_at=decided_at,
            ),
        )
        add_to_index(index, collection.by_id[entry_id], embedder)
        append_record(
            queue.queue_path,
            {
                "kind": "decision",
                "item_id": item_id,
                "state": "approved",
                "reviewer_id": reviewer_id,
                "decided_at": decided_at,
            },
        )
        item.status = Approved(reviewer_id=reviewer_id, decided_at=decided_at)
        _append_audit(queue, reviewer_id, "approve", item_id, {"entry_id": entry_id})
    except BaseException:
        if entry_id is not None and collection.by_id.get(entry_id) is not None:
            collection.by_id.pop(entry_id, None)
            if collection.entries and collection.entries[-1].id == entry_id:
                collection.entries.pop()
        index.vectors, index.entry_ids = index_vectors, index_ids
        index._dense64 = index._norms64 = None
        item.status = Pending()
        queue.next_seq = seq_before
        truncate_to(kb_path, kb_size)
        truncate_to(queue.queue_path, queue_size)
        truncate_to(queue.audit_path, audit_size)
        raise
    return DecisionOutcome(status="approved", item_id=item_id, entry_id=entry_id)


def read_audit(audit_path: str | Path) -> list[dict[str, Any]]:
    """All audit records in order; validates the strictly-increasing sequence."""
    records: list[dict[str, Any]] = []
    last = -1
    for _, obj in read_records(audit_path):
        seq = obj.get("seq")
        if not isinstance(seq, int) or seq <= last:
            raise StorageFailure(f"audit log sequence not strictly increasing at {seq!r}")
        last = seq
        records.append(obj)
    return records
