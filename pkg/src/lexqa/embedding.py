"""Text embedding providers and the KB indexing strategies.

All providers emit fixed-dimension unit-norm float32 vectors, so cosine
similarity downstream reduces to a dot product. Two providers exist:

* local: deterministic character-bigram hashing, dim 256. No model, no
  network; character n-grams are the natural lexical unit for the Chinese
  legal text this engine targets and need no tokenizer.
* remote: any endpoint speaking the de-facto embeddings wire protocol
  (POST {endpoint}/embeddings with {model, input: [text]}).
"""

from __future__ import annotations

import functools
import hashlib
import os
from dataclasses import dataclass
from enum import Enum

import httpx
import numpy as np

from lexqa.errors import EmptyText, RemoteUnavailable
from lexqa.kb import KbEntry

LOCAL_DIM = 256
_HASH_KEY = b"lexqa-bigram-v1"  # fixed seed; changing it changes every vector


class IndexingStrategy(str, Enum):
    """Which entry text gets embedded when building the KB index."""

    QUESTION_ONLY = "question_only"
    QUESTION_PLUS_ANSWER = "question_plus_answer"
    QUESTION_PLUS_CANDIDATE = "question_plus_candidate"


@dataclass(frozen=True)
class EmbedderRef:
    """Identity of an embedding provider.

    fingerprint changes iff any identity-affecting field (kind, model,
    dim, endpoint) changes; index caches store it to detect staleness.
    """

    kind: str  # "local" | "remote"
    dim: int
    endpoint: str = ""
    model_name: str = ""
    api_key_env: str = ""
    timeout_s: float = 30.0

    @staticmethod
    def local(dim: int = LOCAL_DIM) -> "EmbedderRef":
        return EmbedderRef(kind="local", dim=dim)

    @staticmethod
    def remote(
        endpoint: str,
        model_name: str,
        dim: int,
        api_key_env: str = "",
        timeout_s: float = 30.0,
    ) -> "EmbedderRef":
        return EmbedderRef(
            kind="remote",
            dim=dim,
            endpoint=endpoint,
            model_name=model_name,
            api_key_env=api_key_env,
            timeout_s=timeout_s,
        )

    @property
    def fingerprint(self) -> str:
        identity = f"{self.kind}|{self.endpoint}|{self.model_name}|{self.dim}"
        return hashlib.sha256(identity.encode("utf-8")).hexdigest()[:16]


def _bucket(gram: str, dim: int) -> int:
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8, key=_HASH_KEY).digest()
    return int.from_bytes(digest, "little") % dim


@functools.lru_cache(maxsize=65536)
def _local_embed_cached(text: str, dim: int) -> np.ndarray:
    counts = np.zeros(dim, dtype=np.float64)
    if len(text) == 1:
        counts[_bucket(text, dim)] += 1.0
    else:
        for i in range(len(text) - 1):
            counts[_bucket(text[i : i + 2], dim)] += 1.0
    vec = (counts / np.linalg.norm(counts)).astype(np.float32)
    vec.flags.writeable = False
    return vec


def local_deterministic_embed(text: str, dim: int = LOCAL_DIM) -> np.ndarray:
    """Character-bigram hashing embedder: identical text -> identical vector.

    Each adjacent code-point pair hashes to a bucket (fixed 64-bit hash,
    fixed seed); single-character texts use the unigram; the count vector
    is L2-normalized.
    """
    if not text.strip():
        raise EmptyText("cannot embed empty text")
    return _local_embed_cached(text, dim)


def _remote_embed_batch(texts: list[str], embedder: EmbedderRef) -> list[np.ndarray]:
    headers = {}
    key = os.environ.get(embedder.api_key_env) if embedder.api_key_env else None
    if key:
        headers["Authorization"] = f"Bearer {key}"
    url = embedder.endpoint.rstrip("/") + "/embeddings"
    try:
        resp = httpx.post(
            url,
            json={"model": embedder.model_name, "input": texts},
            headers=headers,
            timeout=embedder.timeout_s,
        )
        resp.raise_for_status()
        data = resp.json()["data"]
        vectors = []
        for item in data:
            raw = np.asarray(item["embedding"], dtype=np.float64)
            if raw.shape != (embedder.dim,):
                raise RemoteUnavailable(embedder.endpoint, f"expected dim {embedder.dim}, got {raw.shape}")
            norm = np.linalg.norm(raw)
            if norm == 0.0:
                raise RemoteUnavailable(embedder.endpoint, "zero vector returned")
            vectors.append((raw / norm).astype(np.float32))
        if len(vectors) != len(texts):
            raise RemoteUnavailable(embedder.endpoint, "response count mismatch")
        return vectors
    except RemoteUnavailable:
        raise
    except (httpx.HTTPError, KeyError, ValueError, TypeError) as exc:
        raise RemoteUnavailable(embedder.endpoint, str(exc)) from exc


def embed_text(text: str, embedder: EmbedderRef) -> np.ndarray:
    """Embed one text into a unit-norm float32 vector of embedder.dim."""
    if not text.strip():
        raise EmptyText("cannot embed empty text")
    if embedder.kind == "local":
        return local_deterministic_embed(text, embedder.dim)
    return _remote_embed_batch([text], embedder)[0]


def embed_texts(texts: list[str], embedder: EmbedderRef) -> list[np.ndarray]:
    """Batch variant of embed_text (one wire call for remote providers)."""
    for t in texts:
        if not t.strip():
            raise EmptyText("cannot embed empty text")
    if embedder.kind == "local":
        return [local_deterministic_embed(t, embedder.dim) for t in texts]
    return _remote_embed_batch(texts, embedder)


def entry_text(entry: KbEntry, strategy: IndexingStrategy) -> str:
    """The text a strategy embeds for an entry (newline-separated concatenation)."""
    if strategy is IndexingStrategy.QUESTION_PLUS_ANSWER:
        return entry.question + "\n" + entry.answer
    if strategy is IndexingStrategy.QUESTION_PLUS_CANDIDATE:
        if entry.candidate_answer is None:
            return entry.question
        return entry.question + "\n" + entry.candidate_answer
    return entry.question


def embed_entry(entry: KbEntry, strategy: IndexingStrategy, embedder: EmbedderRef) -> np.ndarray:
    return embed_text(entry_text(entry, strategy), embedder)
