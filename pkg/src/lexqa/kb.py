"""Knowledge base: structured QA records with provenance.

Each entry is (id, question, answer, cause) plus an optional
candidate_answer (a conversational-register variant of the answer used by
one of the indexing strategies) and a provenance marker distinguishing
seed data from human-approved write-backs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from lexqa.errors import MalformedRecord, StorageFailure
from lexqa.records import append_record, read_records, write_records


@dataclass(frozen=True)
class Seed:
    """Entry loaded from the seed file."""


@dataclass(frozen=True)
class WrittenBack:
    """Entry added through the review workflow."""

    reviewer_id: str
    source_model: str
    approved_at: str  # ISO-8601 UTC


Provenance = Seed | WrittenBack


@dataclass
class KbEntry:
    id: int
    question: str
    answer: str
    cause: str = ""
    candidate_answer: str | None = None
    provenance: Provenance = field(default_factory=Seed)


@dataclass
class KbCollection:
    """In-memory KB: insertion-ordered entries plus an id lookup.

    `path` is the backing record file when the collection was loaded from
    (or is persisted to) disk; append_entry requires it.
    """

    entries: list[KbEntry] = field(default_factory=list)
    by_id: dict[int, KbEntry] = field(default_factory=dict)
    path: Path | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, entry_id: int) -> KbEntry | None:
        return self.by_id.get(entry_id)

    def next_id(self) -> int:
        return max(self.by_id) + 1 if self.by_id else 0


def _provenance_to_dict(p: Provenance) -> dict[str, Any]:
    if isinstance(p, WrittenBack):
        return {
            "kind": "written_back",
            "reviewer_id": p.reviewer_id,
            "source_model": p.source_model,
            "approved_at": p.approved_at,
        }
    return {"kind": "seed"}


def _provenance_from_dict(obj: Any) -> Provenance:
    if not isinstance(obj, dict):
        raise ValueError("provenance must be an object")
    kind = obj.get("kind")
    if kind == "seed":
        return Seed()
    if kind == "written_back":
        return WrittenBack(
            reviewer_id=str(obj["reviewer_id"]),
            source_model=str(obj["source_model"]),
            approved_at=str(obj["approved_at"]),
        )
    raise ValueError(f"unknown provenance kind {kind!r}")


def entry_to_dict(entry: KbEntry) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "id": entry.id,
        "question": entry.question,
        "answer": entry.answer,
        "cause": entry.cause,
        "provenance": _provenance_to_dict(entry.provenance),
    }
    if entry.candidate_answer is not None:
        obj["candidate_answer"] = entry.candidate_answer
    return obj


def _entry_from_dict(obj: dict[str, Any]) -> KbEntry:
    entry_id = obj.get("id")
    if not isinstance(entry_id, int) or isinstance(entry_id, bool) or entry_id < 0:
        raise ValueError("id must be a non-negative integer")
    question = obj.get("question")
    answer = obj.get("answer")
    if not isinstance(question, str) or not question.strip():
        raise ValueError("question must be non-empty text")
    if not isinstance(answer, str) or not answer.strip():
        raise ValueError("answer must be non-empty text")
    cause = obj.get("cause", "")
    if not isinstance(cause, str):
        raise ValueError("cause must be text")
    candidate = obj.get("candidate_answer")
    if candidate is not None and not isinstance(candidate, str):
        raise ValueError("candidate_answer must be text")
    provenance = _provenance_from_dict(obj.get("provenance", {"kind": "seed"}))
    return KbEntry(
        id=entry_id,
        question=question,
        answer=answer,
        cause=cause,
        candidate_answer=candidate,
        provenance=provenance,
    )


def load_kb(path: str | Path) -> KbCollection:
    """Load the KB file. Raises MissingFile / MalformedRecord(lineno) on the first bad line."""
    collection = KbCollection(path=Path(path))
    for lineno, obj in read_records(path):
        try:
            entry = _entry_from_dict(obj)
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedRecord(lineno, str(exc)) from exc
        if entry.id in collection.by_id:
            raise MalformedRecord(lineno, f"duplicate id {entry.id}")
        collection.entries.append(entry)
        collection.by_id[entry.id] = entry
    return collection


def save_kb(collection: KbCollection, path: str | Path) -> None:
    """Write all entries to `path` (atomic replace); load_kb round-trips field-for-field."""
    write_records(path, [entry_to_dict(e) for e in collection.entries])
    collection.path = Path(path)


def append_entry(
    collection: KbCollection,
    question: str,
    answer: str,
    cause: str = "",
    candidate_answer: str | None = None,
    provenance: Provenance | None = None,
) -> int:
    """Assign the next id (max existing + 1) and append the entry.

    The entry is durably appended to the backing file before it becomes
    visible in memory; if the file append fails the collection is unchanged.
    """
    if not question.strip():
        raise ValueError("question must be non-empty")
    if not answer.strip():
        raise ValueError("answer must be non-empty")
    if collection.path is None:
        raise StorageFailure("collection has no backing file")
    entry = KbEntry(
        id=collection.next_id(),
        question=question,
        answer=answer,
        cause=cause,
        candidate_answer=candidate_answer,
        provenance=provenance if provenance is not None else Seed(),
    )
    append_record(collection.path, entry_to_dict(entry))
    collection.entries.append(entry)
    collection.by_id[entry.id] = entry
    return entry.id
