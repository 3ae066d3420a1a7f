"""Shared file plumbing: canonical JSON, atomic writes, format/version checks."""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any


class FormatError(ValueError):
    """An artifact file has the wrong format tag or version."""


def fmt_float(x: float) -> str:
    """Shortest decimal string that round-trips the float exactly."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        raise ValueError("NaN has no file representation")
    return repr(float(x))


def parse_float(s: str) -> float:
    return float(s)


def canonical_dumps(doc: Any) -> str:
    """Deterministic compact JSON (sorted keys, no whitespace)."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file in the same directory plus rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def config_hash(config: dict[str, Any]) -> str:
    """Stable hex digest identifying the producing configuration."""
    return hashlib.sha256(canonical_dumps(config).encode()).hexdigest()[:16]


def require_format(doc: dict[str, Any], expected: str, path: str | Path) -> None:
    found = doc.get("format")
    if found != expected:
        raise FormatError(f"{path}: expected format {expected!r}, found {found!r}")


def load_json(path: str | Path, expected_format: str | None = None) -> dict[str, Any]:
    with open(path) as fh:
        doc = json.load(fh)
    if expected_format is not None:
        require_format(doc, expected_format, path)
    return doc
