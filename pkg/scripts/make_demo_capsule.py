#!/usr/bin/env python3
"""Build the demo content capsule: 3 cities x 4 slots x 5 items.

Run from the repository root:

    python3 scripts/make_demo_capsule.py

Media files are tiny placeholders (the engine never decodes media bytes; only
the sidecar metadata matters). All metadata is a fixed function of the city,
slot and item number, so regenerating the capsule is byte-stable, including
index.json.
"""

from __future__ import annotations

import shutil
import sys
from pathlib import Path

from einstall.content_capsule import ingest_directory
from einstall.jsonio import dumps_pretty

CITIES = ("karlsruhe", "new_york", "seoul")
SLOTS = ("collage_1", "collage_2", "collage_3", "collage_4")

# (kind, extension, fps or None) cycled per item index.
ITEM_SHAPES = (
    ("video", "mp4", 25.0),
    ("image", "png", None),
    ("video", "mp4", 12.5),
    ("text", "txt", None),
    ("audio", "ogg", None),
)


def main() -> int:
    root = Path(__file__).resolve().parent.parent
    out = root / "capsules" / "demo"
    if out.exists():
        shutil.rmtree(out)
    for ci, city in enumerate(CITIES):
        for si, slot in enumerate(SLOTS):
            folder = out / city / slot
            folder.mkdir(parents=True)
            for i in range(5):
                kind, ext, fps = ITEM_SHAPES[i]
                # Durations vary per (city, slot, item) but stay fps-aligned.
                duration = 4.0 + 2.0 * i + 0.4 * si + 0.2 * ci
                name = f"item_{i + 1:02d}"
                (folder / f"{name}.{ext}").write_text(
                    f"placeholder {kind} for {city}/{slot}/{name}\n", encoding="utf-8"
                )
                meta: dict = {"kind": kind, "duration": duration}
                if fps is not None:
                    meta["fps"] = fps
                (folder / f"{name}.{ext}.meta.json").write_text(dumps_pretty(meta), encoding="utf-8")
    capsule = ingest_directory(out)
    n = sum(len(v) for v in capsule.index.values())
    print(f"wrote {out}: {n} items, {len(capsule.cities())} cities")
    return 0


if __name__ == "__main__":
    sys.exit(main())
