"""Canonical JSON formatting.

All persisted documents (manifests, capsule indexes, traces) and every wire
message are produced through these helpers so equal values always yield equal
bytes: keys keep insertion order, floats use shortest round-trip repr with
negative zero normalized away, and non-finite numbers are rejected.
"""

from __future__ import annotations

import json
import math
from typing import Any


def canonicalize(value: Any) -> Any:
    """Recursively normalize a JSON-able structure for stable serialization."""
    if isinstance(value, dict):
        return {k: canonicalize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [canonicalize(v) for v in value]
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite number not representable: {value!r}")
        return 0.0 if value == 0.0 else value
    raise TypeError(f"not JSON-serializable: {type(value).__name__}")


def dumps_compact(obj: Any) -> str:
    """One-line canonical JSON (wire format, trace records)."""
    return json.dumps(canonicalize(obj), separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def dumps_pretty(obj: Any) -> str:
    """Indented canonical JSON with trailing newline (files meant for diffing)."""
    return (
        json.dumps(canonicalize(obj), indent=2, separators=(",", ": "), ensure_ascii=False, allow_nan=False)
        + "\n"
    )
