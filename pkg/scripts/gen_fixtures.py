#!/usr/bin/env python3
"""Regenerate the checked-in fixture files from the built-in definitions.

Run from the repository root:

    python3 scripts/gen_fixtures.py

Writes scenes/vf.json, scenes/mc.json and sensors/ring8.json. The test suite
asserts the files match the builtins, so rerun this after changing either.
"""

from __future__ import annotations

import sys
from pathlib import Path

from einstall.scene_model import builtin_scene, serialize_manifest
from einstall.tracking import ring8, serialize_sensors


def main() -> int:
    root = Path(__file__).resolve().parent.parent
    (root / "scenes").mkdir(exist_ok=True)
    (root / "sensors").mkdir(exist_ok=True)
    for name in ("vf", "mc"):
        path = root / "scenes" / f"{name}.json"
        path.write_text(serialize_manifest(builtin_scene(name)), encoding="utf-8")
        print(f"wrote {path}")
    path = root / "sensors" / "ring8.json"
    path.write_text(serialize_sensors(ring8()), encoding="utf-8")
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
