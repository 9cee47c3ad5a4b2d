"""Flat vector index: exact cosine search, top-k with deduplication, binary cache.

Exact (non-approximate) search keeps threshold routing auditable and lets a
brute-force scan serve as the correctness oracle. Scores are computed in
float64 as dot(a,b)/(|a||b|) even though rows are stored unit-norm, so a
row's score against itself is 1.0 to within float rounding.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from lexqa.embedding import EmbedderRef, IndexingStrategy, embed_entry, embed_texts, entry_text
from lexqa.errors import (
    CorruptCache,
    DimensionMismatch,
    DuplicateEntry,
    EmbeddingFailure,
    FingerprintMismatch,
    MissingFile,
    StorageFailure,
)
from lexqa.kb import KbCollection, KbEntry

_MAGIC = b"LXIC"
_VERSION = 1


@dataclass(frozen=True)
class RetrievalHit:
    entry_id: int
    score: float


@dataclass
class VectorIndex:
    """Row-per-entry matrix of unit vectors with parallel entry ids.

    Mutation (add_row) replaces the arrays rather than writing in place, so
    a reader that captured a snapshot keeps a consistent view.
    """

    vectors: np.ndarray  # float32, shape (n, dim)
    entry_ids: list[int]
    strategy: IndexingStrategy
    embedder_fingerprint: str
    dim: int
    _dense64: np.ndarray | None = field(default=None, repr=False)
    _norms64: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.entry_ids)

    def snapshot(self) -> tuple[np.ndarray, tuple[int, ...]]:
        return self.vectors, tuple(self.entry_ids)

    def _score_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if self._dense64 is None or self._norms64 is None:
            dense = self.vectors.astype(np.float64)
            self._dense64 = dense
            self._norms64 = np.linalg.norm(dense, axis=1) if len(dense) else np.zeros(0)
        return self._dense64, self._norms64

    def add_row(self, entry_id: int, vector: np.ndarray) -> None:
        if vector.shape != (self.dim,):
            raise DimensionMismatch(f"expected dim {self.dim}, got {vector.shape}")
        row = vector.astype(np.float32).reshape(1, self.dim)
        self.vectors = np.vstack([self.vectors, row]) if len(self.entry_ids) else row.copy()
        self.entry_ids = self.entry_ids + [entry_id]
        self._dense64 = None
        self._norms64 = None


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """dot(a,b) / (|a||b|); equals the plain dot product for unit vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def empty_index(strategy: IndexingStrategy, embedder: EmbedderRef) -> VectorIndex:
    return VectorIndex(
        vectors=np.zeros((0, embedder.dim), dtype=np.float32),
        entry_ids=[],
        strategy=strategy,
        embedder_fingerprint=embedder.fingerprint,
        dim=embedder.dim,
    )


def build_index(
    collection: KbCollection, strategy: IndexingStrategy, embedder: EmbedderRef
) -> VectorIndex:
    """Embed every entry (collection order) into a fresh index."""
    index = empty_index(strategy, embedder)
    if not collection.entries:
        return index
    texts = []
    for entry in collection.entries:
        text = entry_text(entry, strategy)
        if not text.strip():
            raise EmbeddingFailure(f"entry {entry.id}: empty text under strategy {strategy.value}")
        texts.append(text)
    vectors = embed_texts(texts, embedder)
    index.vectors = np.vstack([v.reshape(1, embedder.dim) for v in vectors]).astype(np.float32)
    index.entry_ids = [e.id for e in collection.entries]
    return index


def add_to_index(index: VectorIndex, entry: KbEntry, embedder: EmbedderRef) -> None:
    """Incrementally add one entry; search then treats it like a build-time row."""
    if entry.id in index.entry_ids:
        raise DuplicateEntry(f"entry {entry.id} already indexed")
    if embedder.fingerprint != index.embedder_fingerprint:
        raise FingerprintMismatch(index.embedder_fingerprint, embedder.fingerprint)
    index.add_row(entry.id, embed_entry(entry, index.strategy, embedder))


def search(index: VectorIndex, query_vec: np.ndarray, k: int) -> list[RetrievalHit]:
    """Top-k by cosine, deduplicated by entry id, ties broken by ascending id."""
    query_vec = np.asarray(query_vec)
    if query_vec.shape != (index.dim,):
        raise DimensionMismatch(f"query shape {query_vec.shape}, index dim {index.dim}")
    if k < 1:
        raise ValueError("k must be >= 1")
    n = len(index.entry_ids)
    if n == 0:
        return []
    dense, norms = index._score_arrays()
    q = query_vec.astype(np.float64)
    scores = dense @ q / (norms * np.linalg.norm(q))
    ids = index.entry_ids
    order = sorted(range(n), key=lambda i: (-scores[i], ids[i]))
    hits: list[RetrievalHit] = []
    seen: set[int] = set()
    for i in order:
        if ids[i] in seen:
            continue
        seen.add(ids[i])
        hits.append(RetrievalHit(entry_id=ids[i], score=float(scores[i])))
        if len(hits) == k:
            break
    return hits


def batch_search(
    index: VectorIndex, query_vecs: list[np.ndarray], k: int
) -> list[list[RetrievalHit]]:
    results = []
    for pos, vec in enumerate(query_vecs):
        try:
            results.append(search(index, vec, k))
        except DimensionMismatch as exc:
            raise DimensionMismatch(f"query {pos}: {exc}") from exc
    return results


def save_index_cache(index: VectorIndex, path: str | Path) -> None:
    """Bit-exact binary dump: header (version, dim, strategy, fingerprint, count) + rows."""
    strategy_b = index.strategy.value.encode("utf-8")
    fingerprint_b = index.embedder_fingerprint.encode("utf-8")
    parts = [
        _MAGIC,
        struct.pack("<II", _VERSION, index.dim),
        struct.pack("<H", len(strategy_b)),
        strategy_b,
        struct.pack("<H", len(fingerprint_b)),
        fingerprint_b,
        struct.pack("<Q", len(index.entry_ids)),
    ]
    for entry_id, row in zip(index.entry_ids, index.vectors):
        parts.append(struct.pack("<Q", entry_id))
        parts.append(row.astype("<f4").tobytes())
    blob = b"".join(parts)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(blob)
        tmp.replace(path)
    except OSError as exc:
        tmp.unlink(missing_ok=True)
        raise StorageFailure(f"cache write to {path} failed: {exc}") from exc


def load_index_cache(path: str | Path, expected_fingerprint: str) -> VectorIndex:
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    blob = path.read_bytes()
    try:
        if blob[:4] != _MAGIC:
            raise CorruptCache("bad magic")
        off = 4
        version, dim = struct.unpack_from("<II", blob, off)
        off += 8
        if version != _VERSION:
            raise CorruptCache(f"unsupported cache version {version}")
        (strat_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        strategy_tag = blob[off : off + strat_len].decode("utf-8")
        off += strat_len
        (fp_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        fingerprint = blob[off : off + fp_len].decode("utf-8")
        off += fp_len
        (count,) = struct.unpack_from("<Q", blob, off)
        off += 8
        row_bytes = 8 + dim * 4
        if len(blob) != off + count * row_bytes:
            raise CorruptCache("size mismatch (truncated or trailing bytes)")
        try:
            strategy = IndexingStrategy(strategy_tag)
        except ValueError:
            raise CorruptCache(f"unknown strategy tag {strategy_tag!r}")
        if fingerprint != expected_fingerprint:
            raise FingerprintMismatch(fingerprint, expected_fingerprint)
        entry_ids: list[int] = []
        rows = np.zeros((count, dim), dtype=np.float32)
        for i in range(count):
            (entry_id,) = struct.unpack_from("<Q", blob, off)
            off += 8
            rows[i] = np.frombuffer(blob, dtype="<f4", count=dim, offset=off)
            off += dim * 4
            entry_ids.append(entry_id)
        if len(set(entry_ids)) != len(entry_ids):
            raise CorruptCache("duplicate entry ids")
    except struct.error as exc:
        raise CorruptCache(f"truncated header: {exc}") from exc
    return VectorIndex(
        vectors=rows,
        entry_ids=entry_ids,
        strategy=strategy,
        embedder_fingerprint=fingerprint,
        dim=dim,
    )
