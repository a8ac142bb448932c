"""Deterministic offline content store.

Installations whose imagery was assembled live from the open web cannot be
re-enacted against the live web: pages move, feeds rot, APIs die. A capsule is
a plain directory snapshot of that content, indexed by (city_id, slot), from
which playlists are dealt reproducibly. Media bytes are never decoded here;
only sidecar metadata (kind, duration, fps) drives scheduling, so the engine
stays headless and bit-stable.

Capsule layout:

    <root>/index.json                       version "capsule/1", sorted entries
    <root>/<city>/<slot>/<media files>      opaque assets, one sidecar each

A sidecar ``<file>.meta.json`` holds {"kind", "duration", "fps"} for its
neighbor; ``fps`` may be omitted for non-video kinds and defaults to 1.
Playlist order is a pure function of (city_id, slot, seed): a backward
Fisher-Yates shuffle driven by SplitMix64 seeded with the FNV-1a mix of the
three values. Same inputs, same bytes, on any machine.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .determinism import SplitMix64, fisher_yates, mix_key
from .jsonio import dumps_pretty

MEDIA_KINDS = frozenset({"video", "image", "audio", "text"})

CAPSULE_VERSION = "capsule/1"
INDEX_NAME = "index.json"
SIDECAR_SUFFIX = ".meta.json"

_ENTRY_KEYS = ("city_id", "slot", "media_id", "kind", "duration", "fps", "frame_count", "uri")


class CapsuleError(ValueError):
    """Base class for capsule failures."""


class MissingIndexError(CapsuleError):
    pass


class MalformedIndexError(CapsuleError):
    pass


class UnresolvableUriError(CapsuleError):
    def __init__(self, uri: str) -> None:
        super().__init__(f"index entry uri does not resolve to a file: {uri!r}")
        self.uri = uri


class IngestError(CapsuleError):
    pass


class CapsuleKeyError(CapsuleError):
    def __init__(self, city_id: str, slot: str) -> None:
        super().__init__(f"no capsule entries for city {city_id!r}, slot {slot!r}")
        self.city_id = city_id
        self.slot = slot


def frame_count_for(duration: float, fps: float) -> int:
    """Frame count implied by duration and rate, half-up so every runtime agrees."""
    return int(math.floor(duration * fps + 0.5))


@dataclass(frozen=True, slots=True)
class MediaItem:
    """One scheduled asset. ``uri`` is a relative path inside its capsule or scene."""

    media_id: str
    kind: str
    duration: float
    fps: float
    frame_count: int
    uri: str

    def __post_init__(self) -> None:
        if not self.media_id:
            raise ValueError("media_id must be non-empty")
        if self.kind not in MEDIA_KINDS:
            raise ValueError(f"unknown media kind {self.kind!r}")
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ValueError(f"duration must be a positive finite number, got {self.duration!r}")
        if not (math.isfinite(self.fps) and self.fps > 0):
            raise ValueError(f"fps must be a positive finite number, got {self.fps!r}")
        if self.frame_count != frame_count_for(self.duration, self.fps):
            raise ValueError(
                f"frame_count {self.frame_count} inconsistent with duration*fps "
                f"(expected {frame_count_for(self.duration, self.fps)})"
            )
        if self.frame_count < 1:
            raise ValueError("frame_count must be at least 1")
        if not self.uri:
            raise ValueError("uri must be non-empty")

    def to_jsonable(self) -> dict:
        return {
            "media_id": self.media_id,
            "kind": self.kind,
            "duration": self.duration,
            "fps": self.fps,
            "frame_count": self.frame_count,
            "uri": self.uri,
        }

    @classmethod
    def from_jsonable(cls, obj: dict, where: str) -> "MediaItem":
        if not isinstance(obj, dict):
            raise ValueError(f"{where}: media item must be an object")
        extra = set(obj) - {"media_id", "kind", "duration", "fps", "frame_count", "uri"}
        if extra:
            raise ValueError(f"{where}: unknown media item keys {sorted(extra)}")
        try:
            return cls(
                media_id=_req_str(obj, "media_id", where),
                kind=_req_str(obj, "kind", where),
                duration=_req_num(obj, "duration", where),
                fps=_req_num(obj, "fps", where),
                frame_count=_req_int(obj, "frame_count", where),
                uri=_req_str(obj, "uri", where),
            )
        except ValueError as exc:
            raise ValueError(f"{where}: {exc}") from None


@dataclass(frozen=True, slots=True)
class Playlist:
    """Ordered media sequence for one channel or stream slot."""

    items: tuple[MediaItem, ...]

    def __post_init__(self) -> None:
        if not self.items:
            raise ValueError("playlist must be non-empty")

    @property
    def total_duration(self) -> float:
        return sum(item.duration for item in self.items)


@dataclass(frozen=True)
class Capsule:
    """Read-only view of an opened capsule directory."""

    root: Path
    version: str
    index: dict[tuple[str, str], tuple[MediaItem, ...]]

    def cities(self) -> list[str]:
        return sorted({city for city, _ in self.index})

    def slots_for(self, city_id: str) -> list[str]:
        return sorted(slot for city, slot in self.index if city == city_id)

    def items_for(self, city_id: str, slot: str) -> tuple[MediaItem, ...]:
        try:
            return self.index[(city_id, slot)]
        except KeyError:
            raise CapsuleKeyError(city_id, slot) from None


def _req_str(obj: dict, key: str, where: str) -> str:
    v = obj.get(key)
    if not isinstance(v, str):
        raise ValueError(f"{where}: {key} must be a string")
    return v


def _req_num(obj: dict, key: str, where: str) -> float:
    v = obj.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"{where}: {key} must be a number")
    return float(v)


def _req_int(obj: dict, key: str, where: str) -> int:
    v = obj.get(key)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValueError(f"{where}: {key} must be an integer")
    return v


def open_capsule(path: str | Path) -> Capsule:
    """Load and eagerly verify a capsule directory."""
    root = Path(path)
    index_path = root / INDEX_NAME
    if not index_path.is_file():
        raise MissingIndexError(f"no {INDEX_NAME} in {root}")
    try:
        doc = json.loads(index_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedIndexError(f"{INDEX_NAME}: invalid JSON at line {exc.lineno} column {exc.colno}") from None
    if not isinstance(doc, dict) or set(doc) != {"version", "entries"}:
        raise MalformedIndexError(f"{INDEX_NAME}: top-level keys must be exactly version, entries")
    if doc["version"] != CAPSULE_VERSION:
        raise MalformedIndexError(f"unsupported capsule version {doc['version']!r}")
    if not isinstance(doc["entries"], list) or not doc["entries"]:
        raise MalformedIndexError("entries must be a non-empty array")

    index: dict[tuple[str, str], list[MediaItem]] = {}
    previous_key: tuple[str, str, str] | None = None
    for i, raw in enumerate(doc["entries"]):
        where = f"entries[{i}]"
        if not isinstance(raw, dict):
            raise MalformedIndexError(f"{where}: must be an object")
        extra = set(raw) - set(_ENTRY_KEYS)
        if extra:
            raise MalformedIndexError(f"{where}: unknown keys {sorted(extra)}")
        try:
            city_id = _req_str(raw, "city_id", where)
            slot = _req_str(raw, "slot", where)
            item = MediaItem.from_jsonable({k: raw[k] for k in raw if k not in ("city_id", "slot")}, where)
        except ValueError as exc:
            raise MalformedIndexError(str(exc)) from None
        key = (city_id, slot, item.media_id)
        # Sortedness is part of the format so identical trees give identical bytes.
        if previous_key is not None and key <= previous_key:
            raise MalformedIndexError(f"{where}: entries out of (city_id, slot, media_id) order or duplicated")
        previous_key = key
        uri = Path(item.uri)
        if uri.is_absolute() or ".." in uri.parts:
            raise MalformedIndexError(f"{where}: uri must be a plain relative path, got {item.uri!r}")
        if not (root / uri).is_file():
            raise UnresolvableUriError(item.uri)
        index.setdefault((city_id, slot), []).append(item)

    return Capsule(root=root, version=CAPSULE_VERSION, index={k: tuple(v) for k, v in index.items()})


def resolve_playlist(capsule: Capsule, city_id: str, slot: str, seed: int) -> Playlist:
    """Deal the indexed items for (city_id, slot) into a seed-determined order."""
    items = capsule.items_for(city_id, slot)
    rng = SplitMix64(mix_key(city_id, slot, seed))
    return Playlist(items=tuple(fisher_yates(items, rng)))


def _read_sidecar(media_path: Path) -> tuple[str, float, float]:
    sidecar = media_path.with_name(media_path.name + SIDECAR_SUFFIX)
    if not sidecar.is_file():
        raise IngestError(f"media file without sidecar metadata: {media_path}")
    try:
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IngestError(f"{sidecar}: invalid JSON at line {exc.lineno} column {exc.colno}") from None
    if not isinstance(meta, dict) or not set(meta) <= {"kind", "duration", "fps"}:
        raise IngestError(f"{sidecar}: keys must be among kind, duration, fps")
    kind = meta.get("kind")
    if kind not in MEDIA_KINDS:
        raise IngestError(f"{sidecar}: kind must be one of {sorted(MEDIA_KINDS)}")
    duration = meta.get("duration")
    if isinstance(duration, bool) or not isinstance(duration, (int, float)):
        raise IngestError(f"{sidecar}: duration must be a number")
    fps = meta.get("fps", 1.0)
    if isinstance(fps, bool) or not isinstance(fps, (int, float)):
        raise IngestError(f"{sidecar}: fps must be a number")
    if kind == "video" and "fps" not in meta:
        raise IngestError(f"{sidecar}: video entries must state fps")
    return kind, float(duration), float(fps)


def ingest_directory(path: str | Path) -> Capsule:
    """Index a ``<city>/<slot>/<files>`` tree in place, writing its index.json."""
    root = Path(path)
    if not root.is_dir():
        raise IngestError(f"not a directory: {root}")
    entries: list[dict] = []
    city_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not city_dirs:
        raise IngestError(f"no city folders under {root}")
    for city_dir in city_dirs:
        slot_dirs = sorted(p for p in city_dir.iterdir() if p.is_dir())
        if not slot_dirs:
            raise IngestError(f"city folder contains no slot folders: {city_dir}")
        for slot_dir in slot_dirs:
            media_files = sorted(
                p for p in slot_dir.iterdir() if p.is_file() and not p.name.endswith(SIDECAR_SUFFIX)
            )
            if not media_files:
                raise IngestError(f"slot folder contains no media files: {slot_dir}")
            seen_ids: set[str] = set()
            for media_path in media_files:
                kind, duration, fps = _read_sidecar(media_path)
                media_id = media_path.stem
                if media_id in seen_ids:
                    raise IngestError(f"duplicate media_id {media_id!r} in {slot_dir}")
                seen_ids.add(media_id)
                try:
                    item = MediaItem(
                        media_id=media_id,
                        kind=kind,
                        duration=duration,
                        fps=fps,
                        frame_count=frame_count_for(duration, fps),
                        uri=f"{city_dir.name}/{slot_dir.name}/{media_path.name}",
                    )
                except ValueError as exc:
                    raise IngestError(f"{media_path}: {exc}") from None
                entries.append({"city_id": city_dir.name, "slot": slot_dir.name, **item.to_jsonable()})
    entries.sort(key=lambda e: (e["city_id"], e["slot"], e["media_id"]))
    (root / INDEX_NAME).write_text(dumps_pretty({"version": CAPSULE_VERSION, "entries": entries}), encoding="utf-8")
    return open_capsule(root)
