"""Line-delimited JSON record files.

One durable-append mechanism shared by the knowledge base, review queue,
audit log, and trace store: UTF-8, one JSON object per line, lines starting
with '#' are comments. Appends are flushed and fsynced before returning so
a crash never loses an acknowledged write.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Iterator

from lexqa.errors import MalformedRecord, MissingFile, StorageFailure


def read_records(path: str | Path) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield (line_number, object) for every record line. Fail-fast on the first bad line."""
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(lineno, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise MalformedRecord(lineno, "record is not an object")
            yield lineno, obj


def encode_record(obj: dict[str, Any]) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def append_record(path: str | Path, obj: dict[str, Any]) -> int:
    """Durably append one record line; returns the file size before the append.

    The returned offset lets callers undo the append (truncate) when a later
    step of a multi-file transaction fails.
    """
    path = Path(path)
    try:
        with path.open("a", encoding="utf-8") as fh:
            offset = fh.tell()
            fh.write(encode_record(obj) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        return offset
    except OSError as exc:
        raise StorageFailure(f"append to {path} failed: {exc}") from exc


def truncate_to(path: str | Path, size: int) -> None:
    """Roll back a failed multi-step write by truncating to a recorded offset."""
    if size == 0 and not Path(path).exists():
        return
    try:
        with open(path, "r+b") as fh:
            fh.truncate(size)
            fh.flush()
            os.fsync(fh.fileno())
    except OSError as exc:
        raise StorageFailure(f"truncate of {path} failed: {exc}") from exc


def write_records(path: str | Path, objs: list[dict[str, Any]]) -> None:
    """Atomically replace the file with the given records (temp file + rename)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with tmp.open("w", encoding="utf-8") as fh:
            for obj in objs:
                fh.write(encode_record(obj) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except OSError as exc:
        tmp.unlink(missing_ok=True)
        raise StorageFailure(f"write to {path} failed: {exc}") from exc
