"""Error types shared across the engine.

Every error raised by the engine derives from EngineError so callers
(CLI, HTTP service) can map failures to exit codes / status codes in
one place.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine errors."""

    code = "internal"


# --- knowledge base / persistence ---

class MissingFile(EngineError):
    code = "missing_file"


class MalformedRecord(EngineError):
    """A record file is corrupt; parsing stops at the first bad line."""

    code = "malformed_record"

    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason


class StorageFailure(EngineError):
    code = "storage_failure"


# --- embedding ---

class EmptyText(EngineError):
    code = "empty_text"


class RemoteUnavailable(EngineError):
    code = "remote_unavailable"

    def __init__(self, endpoint: str, cause: str):
        super().__init__(f"{endpoint}: {cause}")
        self.endpoint = endpoint
        self.cause = cause


class EmbeddingFailure(EngineError):
    code = "embedding_failure"


# --- retrieval / index cache ---

class DimensionMismatch(EngineError):
    code = "dimension_mismatch"


class FingerprintMismatch(EngineError):
    code = "fingerprint_mismatch"

    def __init__(self, stored: str, expected: str):
        super().__init__(f"stored fingerprint {stored!r} != expected {expected!r}")
        self.stored = stored
        self.expected = expected


class CorruptCache(EngineError):
    code = "corrupt_cache"


class DuplicateEntry(EngineError):
    code = "duplicate_entry"


# --- generation / selection ---

class AllProvidersFailed(EngineError):
    code = "all_providers_failed"


class SelectorFailure(EngineError):
    code = "selector_failure"


class InvalidWeights(EngineError):
    code = "invalid_weights"


class EmptyCandidateList(EngineError):
    code = "empty_candidate_list"


# --- orchestration ---

class UnresolvableHit(EngineError):
    code = "unresolvable_hit"


# --- review workflow ---

class ItemNotFound(EngineError):
    code = "item_not_found"


class AlreadyDecided(EngineError):
    code = "already_decided"


# --- evaluation ---

class DatasetTooSmall(EngineError):
    code = "dataset_too_small"


class InvalidBeta(EngineError):
    code = "invalid_beta"


class ConfigError(EngineError):
    code = "config_error"
