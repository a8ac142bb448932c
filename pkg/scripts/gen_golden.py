#!/usr/bin/env python3
"""Regenerate tests/golden/vf_60.ndjson from tests/golden_script.py."""

from __future__ import annotations

import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO_ROOT / "tests"))

from golden_script import golden_lines  # noqa: E402


def main() -> None:
    out = REPO_ROOT / "tests" / "golden" / "vf_60.ndjson"
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = golden_lines()
    out.write_bytes(b"".join(lines))
    print(f"wrote {out}: {len(lines)} lines")


if __name__ == "__main__":
    main()
