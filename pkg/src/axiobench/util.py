"""Shared helpers: stable seeding, JSONL io, atomic writes."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator


class InputError(Exception):
    """Raised for problems caused by user-supplied inputs (bad files, bad
    arguments, inconsistent data).  The CLI maps this to exit code 2."""


def stable_seed(*parts: Any) -> int:
    """Derive a 64-bit seed from a tuple of values, stable across runs
    and processes (never uses the builtin hash)."""
    h = hashlib.sha256()
    for p in parts:
        h.update(repr(p).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "big")


def dumps_canonical(obj: Any) -> str:
    """Serialize with sorted keys so output bytes are reproducible."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def read_json(path: str | Path) -> Any:
    """Load one JSON document, turning missing files and parse errors
    into InputError so callers surface them as usage problems."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc.msg})") from exc


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, record) pairs; line numbers are 1-based."""
    try:
        fh = open(path, "r", encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(rec, dict):
                raise InputError(f"{path}: line {lineno}: expected an object")
            yield lineno, rec


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    atomic_write(path, "".join(dumps_canonical(r) + "\n" for r in records))


def atomic_write(path: str | Path, text: str) -> None:
    """Write text to path via a rename so readers never see partial files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
