"""Scene manifests: the declarative description of a re-enacted installation.

A manifest lists the physical inventory of an artwork as it is rebuilt in the
virtual hall: display nodes (structural meshes, neon tubes, media surfaces),
video channels with their playlists and delay offsets, projector stream slots,
positional speakers, and interactive menu widgets. Everything downstream (the
tick engine, the wire protocol, the viewer) consumes these values and never
re-derives them.

The on-disk format is canonical JSON: UTF-8, LF, two-space indent, fixed key
order, floats in shortest round-trip form with negative zero normalized.
parse_manifest is strict (unknown keys rejected, every reference checked) so a
manifest that loads once loads identically everywhere.

Two fixtures ship with the package:

* ``vf`` — a fountain of 38 CRT media surfaces in four tiers plus 20 neon
  tubes, wired into two video circuits of 19 screens each. The second circuit
  can carry a configurable delay to re-create broadcast-path latency between
  otherwise identical loops. The knobs on the original cabinets do not alter
  the imagery, so they are not modeled.
* ``mc`` — four projection cubes fed by stream slots collage_1..4, four
  positional speakers, and a city-selection menu that rebinds all four slots
  to the chosen city's offline content.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any

from .content_capsule import MediaItem
from .geometry import TAU, Pose, Vec3, wrap_angle
from .jsonio import dumps_pretty

NODE_KINDS = frozenset({"static_mesh", "neon_element", "media_surface"})
ENVIRONMENT_KINDS = frozenset({"none", "panorama", "modeled"})
LEVELS = frozenset({"low", "medium", "high"})
MATERIAL_LINKS = frozenset({"none", "essential"})
GEOMETRY_MODES = frozenset({"structural", "photogrammetric"})
TEXTURE_MODES = frozenset({"flat", "sensor_derived"})

MANIFEST_KEYS = (
    "scene_id",
    "title",
    "artist",
    "environment",
    "nodes",
    "channels",
    "projectors",
    "speakers",
    "widgets",
)


class ManifestError(ValueError):
    """Base class for manifest loading failures."""


class ManifestSyntaxError(ManifestError):
    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"syntax error at line {line} column {column}: {message}")
        self.line = line
        self.column = column


class ManifestSchemaError(ManifestError):
    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path

    @property
    def detail(self) -> str:
        return str(self).partition(": ")[2]


class DanglingReferenceError(ManifestError):
    def __init__(self, path: str, message: str, ref: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path
        self.ref = ref


class UnknownSceneError(ValueError):
    def __init__(self, name: str) -> None:
        super().__init__(f"unknown built-in scene {name!r}; known scenes: mc, vf")
        self.name = name


class CurationError(ValueError):
    """Raised when an assessment does not justify virtualization."""


@dataclass(frozen=True, slots=True)
class Binding:
    """Feed for a media surface: exactly one of a channel or a projector."""

    channel_id: str | None = None
    projector_id: str | None = None


@dataclass(frozen=True, slots=True)
class SceneNode:
    node_id: str
    kind: str
    pose: Pose
    extent: Vec3
    mesh_asset: str | None = None
    binding: Binding | None = None


@dataclass(frozen=True, slots=True)
class LiteralPlaylist:
    items: tuple[MediaItem, ...]


@dataclass(frozen=True, slots=True)
class CapsuleQuery:
    """Playlist resolved from the content capsule; city_id None means the active city."""

    slot: str
    city_id: str | None = None


PlaylistRef = LiteralPlaylist | CapsuleQuery


@dataclass(frozen=True, slots=True)
class VideoChannel:
    channel_id: str
    playlist: PlaylistRef
    fps: float
    loop: bool
    delay_offset: float


@dataclass(frozen=True, slots=True)
class Projector:
    projector_id: str
    slot: str
    target_surface_ids: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class SpeakerSource:
    """Audio feed: exactly one of a channel or a projector stream slot."""

    channel_id: str | None = None
    slot: str | None = None


@dataclass(frozen=True, slots=True)
class Speaker:
    speaker_id: str
    position: Vec3
    source: SpeakerSource
    reference_gain: float
    reference_distance: float


@dataclass(frozen=True, slots=True)
class CityOption:
    city_id: str
    label: str


@dataclass(frozen=True, slots=True)
class MenuWidget:
    widget_id: str
    pose: Pose
    options: tuple[CityOption, ...]
    driven_slots: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class Environment:
    kind: str
    asset: str | None = None


@dataclass(frozen=True, slots=True)
class Violation:
    """One broken manifest invariant. ``ref`` is set when an id fails to resolve."""

    path: str
    message: str
    ref: str | None = None


@dataclass(frozen=True, slots=True)
class SceneManifest:
    scene_id: str
    title: str
    artist: str
    environment: Environment
    nodes: tuple[SceneNode, ...]
    channels: tuple[VideoChannel, ...] = ()
    projectors: tuple[Projector, ...] = ()
    speakers: tuple[Speaker, ...] = ()
    widgets: tuple[MenuWidget, ...] = ()

    def node_map(self) -> dict[str, SceneNode]:
        return {n.node_id: n for n in self.nodes}

    def channel_map(self) -> dict[str, VideoChannel]:
        return {c.channel_id: c for c in self.channels}

    def projector_by_slot(self) -> dict[str, Projector]:
        return {p.slot: p for p in self.projectors}

    def media_surfaces(self) -> tuple[SceneNode, ...]:
        return tuple(n for n in self.nodes if n.kind == "media_surface")


@dataclass(frozen=True, slots=True)
class AssessmentRecord:
    relevance: str
    vulnerability: str
    documentation_available: bool
    technically_viable: bool
    conceptually_suitable: bool
    material_meaning_link: str

    def __post_init__(self) -> None:
        if self.relevance not in LEVELS:
            raise ValueError(f"relevance must be one of {sorted(LEVELS)}")
        if self.vulnerability not in LEVELS:
            raise ValueError(f"vulnerability must be one of {sorted(LEVELS)}")
        if self.material_meaning_link not in MATERIAL_LINKS:
            raise ValueError(f"material_meaning_link must be one of {sorted(MATERIAL_LINKS)}")


@dataclass(frozen=True, slots=True)
class FidelityPlan:
    geometry: str
    textures: str
    environment: str

    def __post_init__(self) -> None:
        if self.geometry not in GEOMETRY_MODES:
            raise ValueError(f"geometry must be one of {sorted(GEOMETRY_MODES)}")
        if self.textures not in TEXTURE_MODES:
            raise ValueError(f"textures must be one of {sorted(TEXTURE_MODES)}")
        if self.environment not in ENVIRONMENT_KINDS:
            raise ValueError(f"environment must be one of {sorted(ENVIRONMENT_KINDS)}")
        if self.geometry == "photogrammetric" and self.textures != "sensor_derived":
            raise ValueError("photogrammetric geometry requires sensor_derived textures")


def recommend_fidelity(assessment: AssessmentRecord) -> FidelityPlan:
    """Map a curation assessment to a reproduction plan.

    All three gate criteria must hold; the first failed one is named. When the
    artwork's meaning does not depend on its material make-up, the basic
    structure suffices; when the link is essential, geometry and textures must
    come from sensor capture.
    """
    for name, value in (
        ("documentation_available", assessment.documentation_available),
        ("technically_viable", assessment.technically_viable),
        ("conceptually_suitable", assessment.conceptually_suitable),
    ):
        if not value:
            raise CurationError(f"insufficient basis for virtualization: {name} is false")
    if assessment.material_meaning_link == "essential":
        return FidelityPlan(geometry="photogrammetric", textures="sensor_derived", environment="panorama")
    return FidelityPlan(geometry="structural", textures="flat", environment="panorama")


# -- parsing ---------------------------------------------------------------

def _obj(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise ManifestSchemaError(path, "must be an object")
    return value


def _arr(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise ManifestSchemaError(path, "must be an array")
    return value


def _keys_exactly(obj: dict, required: tuple[str, ...], optional: tuple[str, ...], path: str) -> None:
    missing = [k for k in required if k not in obj]
    if missing:
        raise ManifestSchemaError(path, f"missing keys {missing}")
    extra = sorted(set(obj) - set(required) - set(optional))
    if extra:
        raise ManifestSchemaError(path, f"unknown keys {extra}")


def _str(obj: dict, key: str, path: str) -> str:
    v = obj.get(key)
    if not isinstance(v, str):
        raise ManifestSchemaError(f"{path}.{key}", "must be a string")
    return v


def _num(obj: dict, key: str, path: str) -> float:
    v = obj.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ManifestSchemaError(f"{path}.{key}", "must be a number")
    if not math.isfinite(v):
        raise ManifestSchemaError(f"{path}.{key}", "must be finite")
    return float(v)


def _bool(obj: dict, key: str, path: str) -> bool:
    v = obj.get(key)
    if not isinstance(v, bool):
        raise ManifestSchemaError(f"{path}.{key}", "must be a boolean")
    return v


def _vec3(value: Any, path: str) -> Vec3:
    arr = _arr(value, path)
    if len(arr) != 3 or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in arr):
        raise ManifestSchemaError(path, "must be an array of 3 numbers")
    if any(not math.isfinite(v) for v in arr):
        raise ManifestSchemaError(path, "components must be finite")
    return Vec3(float(arr[0]), float(arr[1]), float(arr[2]))


def _pose(value: Any, path: str) -> Pose:
    obj = _obj(value, path)
    _keys_exactly(obj, ("position", "yaw"), (), path)
    return Pose(position=_vec3(obj["position"], f"{path}.position"), yaw=_num(obj, "yaw", path))


def _media_item(value: Any, path: str) -> MediaItem:
    obj = _obj(value, path)
    _keys_exactly(obj, ("media_id", "kind", "duration", "fps", "frame_count", "uri"), (), path)
    fc = obj.get("frame_count")
    if isinstance(fc, bool) or not isinstance(fc, int):
        raise ManifestSchemaError(f"{path}.frame_count", "must be an integer")
    try:
        return MediaItem(
            media_id=_str(obj, "media_id", path),
            kind=_str(obj, "kind", path),
            duration=_num(obj, "duration", path),
            fps=_num(obj, "fps", path),
            frame_count=fc,
            uri=_str(obj, "uri", path),
        )
    except ValueError as exc:
        raise ManifestSchemaError(path, str(exc)) from None


def _node(value: Any, path: str) -> SceneNode:
    obj = _obj(value, path)
    _keys_exactly(obj, ("node_id", "kind", "pose", "extent"), ("mesh_asset", "binding"), path)
    binding = None
    if "binding" in obj:
        bobj = _obj(obj["binding"], f"{path}.binding")
        extra = sorted(set(bobj) - {"channel_id", "projector_id"})
        if extra:
            raise ManifestSchemaError(f"{path}.binding", f"unknown keys {extra}")
        if len(bobj) != 1:
            raise ManifestSchemaError(f"{path}.binding", "must name exactly one of channel_id, projector_id")
        key = next(iter(bobj))
        binding = Binding(**{key: _str(bobj, key, f"{path}.binding")})
    mesh_asset = None
    if "mesh_asset" in obj:
        mesh_asset = _str(obj, "mesh_asset", path)
    return SceneNode(
        node_id=_str(obj, "node_id", path),
        kind=_str(obj, "kind", path),
        pose=_pose(obj["pose"], f"{path}.pose"),
        extent=_vec3(obj["extent"], f"{path}.extent"),
        mesh_asset=mesh_asset,
        binding=binding,
    )


def _playlist_ref(value: Any, path: str) -> PlaylistRef:
    obj = _obj(value, path)
    if set(obj) == {"items"}:
        items = _arr(obj["items"], f"{path}.items")
        return LiteralPlaylist(items=tuple(_media_item(v, f"{path}.items[{i}]") for i, v in enumerate(items)))
    if set(obj) == {"capsule"}:
        cobj = _obj(obj["capsule"], f"{path}.capsule")
        _keys_exactly(cobj, ("slot",), ("city_id",), f"{path}.capsule")
        city = _str(cobj, "city_id", f"{path}.capsule") if "city_id" in cobj else None
        return CapsuleQuery(slot=_str(cobj, "slot", f"{path}.capsule"), city_id=city)
    raise ManifestSchemaError(path, "must contain exactly one of: items, capsule")


def _channel(value: Any, path: str) -> VideoChannel:
    obj = _obj(value, path)
    _keys_exactly(obj, ("channel_id", "playlist", "fps", "loop", "delay_offset"), (), path)
    return VideoChannel(
        channel_id=_str(obj, "channel_id", path),
        playlist=_playlist_ref(obj["playlist"], f"{path}.playlist"),
        fps=_num(obj, "fps", path),
        loop=_bool(obj, "loop", path),
        delay_offset=_num(obj, "delay_offset", path),
    )


def _projector(value: Any, path: str) -> Projector:
    obj = _obj(value, path)
    _keys_exactly(obj, ("projector_id", "slot", "target_surface_ids"), (), path)
    targets = _arr(obj["target_surface_ids"], f"{path}.target_surface_ids")
    ids = []
    for i, t in enumerate(targets):
        if not isinstance(t, str):
            raise ManifestSchemaError(f"{path}.target_surface_ids[{i}]", "must be a string")
        ids.append(t)
    return Projector(
        projector_id=_str(obj, "projector_id", path),
        slot=_str(obj, "slot", path),
        target_surface_ids=tuple(ids),
    )


def _speaker(value: Any, path: str) -> Speaker:
    obj = _obj(value, path)
    _keys_exactly(obj, ("speaker_id", "position", "source", "reference_gain", "reference_distance"), (), path)
    sobj = _obj(obj["source"], f"{path}.source")
    extra = sorted(set(sobj) - {"channel_id", "slot"})
    if extra:
        raise ManifestSchemaError(f"{path}.source", f"unknown keys {extra}")
    if len(sobj) != 1:
        raise ManifestSchemaError(f"{path}.source", "must name exactly one of channel_id, slot")
    key = next(iter(sobj))
    return Speaker(
        speaker_id=_str(obj, "speaker_id", path),
        position=_vec3(obj["position"], f"{path}.position"),
        source=SpeakerSource(**{key: _str(sobj, key, f"{path}.source")}),
        reference_gain=_num(obj, "reference_gain", path),
        reference_distance=_num(obj, "reference_distance", path),
    )


def _widget(value: Any, path: str) -> MenuWidget:
    obj = _obj(value, path)
    _keys_exactly(obj, ("widget_id", "pose", "options", "driven_slots"), (), path)
    options = []
    for i, v in enumerate(_arr(obj["options"], f"{path}.options")):
        oobj = _obj(v, f"{path}.options[{i}]")
        _keys_exactly(oobj, ("city_id", "label"), (), f"{path}.options[{i}]")
        options.append(
            CityOption(
                city_id=_str(oobj, "city_id", f"{path}.options[{i}]"),
                label=_str(oobj, "label", f"{path}.options[{i}]"),
            )
        )
    slots = []
    for i, v in enumerate(_arr(obj["driven_slots"], f"{path}.driven_slots")):
        if not isinstance(v, str):
            raise ManifestSchemaError(f"{path}.driven_slots[{i}]", "must be a string")
        slots.append(v)
    return MenuWidget(
        widget_id=_str(obj, "widget_id", path),
        pose=_pose(obj["pose"], f"{path}.pose"),
        options=tuple(options),
        driven_slots=tuple(slots),
    )


def _environment(value: Any, path: str) -> Environment:
    obj = _obj(value, path)
    kind = _str(obj, "kind", path) if "kind" in obj else None
    if kind == "none":
        _keys_exactly(obj, ("kind",), (), path)
        return Environment(kind="none")
    _keys_exactly(obj, ("kind", "asset"), (), path)
    return Environment(kind=_str(obj, "kind", path), asset=_str(obj, "asset", path))


def parse_manifest(data: bytes | str) -> SceneManifest:
    """Parse and fully validate a manifest document."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ManifestSyntaxError(f"invalid UTF-8 at byte {exc.start}", 0, exc.start) from None
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ManifestSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    root = _obj(doc, "$")
    _keys_exactly(root, MANIFEST_KEYS, (), "$")
    manifest = SceneManifest(
        scene_id=_str(root, "scene_id", "$"),
        title=_str(root, "title", "$"),
        artist=_str(root, "artist", "$"),
        environment=_environment(root["environment"], "environment"),
        nodes=tuple(_node(v, f"nodes[{i}]") for i, v in enumerate(_arr(root["nodes"], "nodes"))),
        channels=tuple(_channel(v, f"channels[{i}]") for i, v in enumerate(_arr(root["channels"], "channels"))),
        projectors=tuple(
            _projector(v, f"projectors[{i}]") for i, v in enumerate(_arr(root["projectors"], "projectors"))
        ),
        speakers=tuple(_speaker(v, f"speakers[{i}]") for i, v in enumerate(_arr(root["speakers"], "speakers"))),
        widgets=tuple(_widget(v, f"widgets[{i}]") for i, v in enumerate(_arr(root["widgets"], "widgets"))),
    )
    violations = validate_manifest(manifest)
    if violations:
        first = violations[0]
        if first.ref is not None:
            raise DanglingReferenceError(first.path, first.message, first.ref)
        raise ManifestSchemaError(first.path, first.message)
    return manifest


# -- validation --------------------------------------------------------------

def validate_manifest(manifest: SceneManifest) -> list[Violation]:
    """Check every manifest invariant; empty result means the manifest is sound.

    Violations come back in canonical traversal order (scene fields, nodes,
    channels, projectors, speakers, widgets) so repeated runs agree byte for
    byte. Unresolvable ids carry the offending id in ``ref``.
    """
    out: list[Violation] = []
    add = out.append

    if not manifest.scene_id:
        add(Violation("scene_id", "scene_id must be non-empty"))
    env = manifest.environment
    if env.kind not in ENVIRONMENT_KINDS:
        add(Violation("environment.kind", f"must be one of {sorted(ENVIRONMENT_KINDS)}"))
    elif env.kind == "none":
        if env.asset is not None:
            add(Violation("environment.asset", "asset must be absent when kind is none"))
    elif not env.asset:
        add(Violation("environment.asset", "asset must be non-empty"))

    channel_ids = {c.channel_id for c in manifest.channels}
    slots = {p.slot for p in manifest.projectors}
    bound_by_projector: dict[str, list[str]] = {}

    if not manifest.nodes:
        add(Violation("nodes", "nodes must be non-empty"))
    seen_nodes: set[str] = set()
    for i, node in enumerate(manifest.nodes):
        path = f"nodes[{i}]"
        if not node.node_id:
            add(Violation(f"{path}.node_id", "node_id must be non-empty"))
        elif node.node_id in seen_nodes:
            add(Violation(f"{path}.node_id", f"duplicate node_id {node.node_id!r}"))
        else:
            seen_nodes.add(node.node_id)
        if node.kind not in NODE_KINDS:
            add(Violation(f"{path}.kind", f"must be one of {sorted(NODE_KINDS)}"))
        if min(node.extent.x, node.extent.y, node.extent.z) <= 0:
            add(Violation(f"{path}.extent", "half-sizes must be positive"))
        b = node.binding
        if node.kind == "media_surface":
            if b is None:
                add(Violation(f"{path}.binding", "media_surface nodes must declare a binding"))
            elif (b.channel_id is None) == (b.projector_id is None):
                add(Violation(f"{path}.binding", "must name exactly one of channel_id, projector_id"))
            elif b.channel_id is not None and b.channel_id not in channel_ids:
                add(
                    Violation(
                        f"{path}.binding.channel_id",
                        f"unknown channel {b.channel_id!r}",
                        ref=b.channel_id,
                    )
                )
            elif b.projector_id is not None:
                if b.projector_id not in {p.projector_id for p in manifest.projectors}:
                    add(
                        Violation(
                            f"{path}.binding.projector_id",
                            f"unknown projector {b.projector_id!r}",
                            ref=b.projector_id,
                        )
                    )
                else:
                    bound_by_projector.setdefault(b.projector_id, []).append(node.node_id)
        elif b is not None and node.kind in NODE_KINDS:
            add(Violation(f"{path}.binding", f"{node.kind} nodes must not declare a binding"))

    node_map = {}
    for node in manifest.nodes:
        node_map.setdefault(node.node_id, node)
    seen_channels: set[str] = set()
    for i, ch in enumerate(manifest.channels):
        path = f"channels[{i}]"
        if not ch.channel_id:
            add(Violation(f"{path}.channel_id", "channel_id must be non-empty"))
        elif ch.channel_id in seen_channels:
            add(Violation(f"{path}.channel_id", f"duplicate channel_id {ch.channel_id!r}"))
        else:
            seen_channels.add(ch.channel_id)
        if not (ch.fps > 0 and math.isfinite(ch.fps)):
            add(Violation(f"{path}.fps", "fps must be positive"))
        if not (ch.delay_offset >= 0 and math.isfinite(ch.delay_offset)):
            add(Violation(f"{path}.delay_offset", "delay_offset must be >= 0"))
        if isinstance(ch.playlist, LiteralPlaylist):
            if not ch.playlist.items:
                add(Violation(f"{path}.playlist.items", "literal playlist must be non-empty"))
        elif not ch.playlist.slot:
            add(Violation(f"{path}.playlist.capsule.slot", "slot must be non-empty"))

    seen_projectors: set[str] = set()
    seen_slots: set[str] = set()
    for i, proj in enumerate(manifest.projectors):
        path = f"projectors[{i}]"
        if not proj.projector_id:
            add(Violation(f"{path}.projector_id", "projector_id must be non-empty"))
        elif proj.projector_id in seen_projectors:
            add(Violation(f"{path}.projector_id", f"duplicate projector_id {proj.projector_id!r}"))
        else:
            seen_projectors.add(proj.projector_id)
        if not proj.slot:
            add(Violation(f"{path}.slot", "slot must be non-empty"))
        elif proj.slot in seen_slots:
            add(Violation(f"{path}.slot", f"duplicate slot {proj.slot!r}"))
        else:
            seen_slots.add(proj.slot)
        if not proj.target_surface_ids:
            add(Violation(f"{path}.target_surface_ids", "must be non-empty"))
        for j, target in enumerate(proj.target_surface_ids):
            tpath = f"{path}.target_surface_ids[{j}]"
            node = node_map.get(target)
            if node is None:
                add(Violation(tpath, f"unknown node {target!r}", ref=target))
            elif node.kind != "media_surface":
                add(Violation(tpath, f"target {target!r} is not a media_surface"))
            elif target not in bound_by_projector.get(proj.projector_id, ()):
                add(Violation(tpath, f"target {target!r} is not bound to projector {proj.projector_id!r}"))

    seen_speakers: set[str] = set()
    for i, spk in enumerate(manifest.speakers):
        path = f"speakers[{i}]"
        if not spk.speaker_id:
            add(Violation(f"{path}.speaker_id", "speaker_id must be non-empty"))
        elif spk.speaker_id in seen_speakers:
            add(Violation(f"{path}.speaker_id", f"duplicate speaker_id {spk.speaker_id!r}"))
        else:
            seen_speakers.add(spk.speaker_id)
        src = spk.source
        if (src.channel_id is None) == (src.slot is None):
            add(Violation(f"{path}.source", "must name exactly one of channel_id, slot"))
        elif src.channel_id is not None and src.channel_id not in channel_ids:
            add(Violation(f"{path}.source.channel_id", f"unknown channel {src.channel_id!r}", ref=src.channel_id))
        elif src.slot is not None and src.slot not in slots:
            add(Violation(f"{path}.source.slot", f"unknown slot {src.slot!r}", ref=src.slot))
        if not (0 < spk.reference_gain <= 1):
            add(Violation(f"{path}.reference_gain", "must be in (0, 1]"))
        if not (spk.reference_distance > 0 and math.isfinite(spk.reference_distance)):
            add(Violation(f"{path}.reference_distance", "must be positive"))

    seen_widgets: set[str] = set()
    for i, widget in enumerate(manifest.widgets):
        path = f"widgets[{i}]"
        if not widget.widget_id:
            add(Violation(f"{path}.widget_id", "widget_id must be non-empty"))
        elif widget.widget_id in seen_widgets:
            add(Violation(f"{path}.widget_id", f"duplicate widget_id {widget.widget_id!r}"))
        else:
            seen_widgets.add(widget.widget_id)
        if not widget.options:
            add(Violation(f"{path}.options", "options must be non-empty"))
        seen_cities: set[str] = set()
        for j, opt in enumerate(widget.options):
            if not opt.city_id:
                add(Violation(f"{path}.options[{j}].city_id", "city_id must be non-empty"))
            elif opt.city_id in seen_cities:
                add(Violation(f"{path}.options[{j}].city_id", f"duplicate city_id {opt.city_id!r}"))
            else:
                seen_cities.add(opt.city_id)
        if not widget.driven_slots:
            add(Violation(f"{path}.driven_slots", "driven_slots must be non-empty"))
        for j, slot in enumerate(widget.driven_slots):
            if slot not in slots:
                add(Violation(f"{path}.driven_slots[{j}]", f"unknown slot {slot!r}", ref=slot))

    return out


# -- serialization -----------------------------------------------------------

def manifest_to_jsonable(manifest: SceneManifest) -> dict:
    def pose(p: Pose) -> dict:
        return {"position": [p.position.x, p.position.y, p.position.z], "yaw": p.yaw}

    def vec(v: Vec3) -> list:
        return [v.x, v.y, v.z]

    def node(n: SceneNode) -> dict:
        out: dict[str, Any] = {"node_id": n.node_id, "kind": n.kind, "pose": pose(n.pose), "extent": vec(n.extent)}
        if n.mesh_asset is not None:
            out["mesh_asset"] = n.mesh_asset
        if n.binding is not None:
            if n.binding.channel_id is not None:
                out["binding"] = {"channel_id": n.binding.channel_id}
            else:
                out["binding"] = {"projector_id": n.binding.projector_id}
        return out

    def playlist(ref: PlaylistRef) -> dict:
        if isinstance(ref, LiteralPlaylist):
            return {"items": [item.to_jsonable() for item in ref.items]}
        capsule: dict[str, Any] = {}
        if ref.city_id is not None:
            capsule["city_id"] = ref.city_id
        capsule["slot"] = ref.slot
        return {"capsule": capsule}

    def channel(c: VideoChannel) -> dict:
        return {
            "channel_id": c.channel_id,
            "playlist": playlist(c.playlist),
            "fps": c.fps,
            "loop": c.loop,
            "delay_offset": c.delay_offset,
        }

    def speaker(s: Speaker) -> dict:
        source = {"channel_id": s.source.channel_id} if s.source.channel_id is not None else {"slot": s.source.slot}
        return {
            "speaker_id": s.speaker_id,
            "position": vec(s.position),
            "source": source,
            "reference_gain": s.reference_gain,
            "reference_distance": s.reference_distance,
        }

    def widget(w: MenuWidget) -> dict:
        return {
            "widget_id": w.widget_id,
            "pose": pose(w.pose),
            "options": [{"city_id": o.city_id, "label": o.label} for o in w.options],
            "driven_slots": list(w.driven_slots),
        }

    env: dict[str, Any] = {"kind": manifest.environment.kind}
    if manifest.environment.asset is not None:
        env["asset"] = manifest.environment.asset
    return {
        "scene_id": manifest.scene_id,
        "title": manifest.title,
        "artist": manifest.artist,
        "environment": env,
        "nodes": [node(n) for n in manifest.nodes],
        "channels": [channel(c) for c in manifest.channels],
        "projectors": [
            {"projector_id": p.projector_id, "slot": p.slot, "target_surface_ids": list(p.target_surface_ids)}
            for p in manifest.projectors
        ],
        "speakers": [speaker(s) for s in manifest.speakers],
        "widgets": [widget(w) for w in manifest.widgets],
    }


def serialize_manifest(manifest: SceneManifest) -> str:
    """Canonical document text; parse_manifest(serialize_manifest(m)) == m."""
    return dumps_pretty(manifest_to_jsonable(manifest))


# -- built-in fixtures -------------------------------------------------------

def _vf_scene(channel_b_delay: float) -> SceneManifest:
    if not (math.isfinite(channel_b_delay) and channel_b_delay >= 0):
        raise ValueError("channel_b_delay must be >= 0")
    nodes: list[SceneNode] = []
    # Four CRT tiers stacked into a fountain silhouette: 16 + 12 + 8 + 2 = 38.
    tiers = (
        (16, 2.2, 0.35, Vec3(0.35, 0.30, 0.28)),
        (12, 1.7, 1.00, Vec3(0.30, 0.26, 0.24)),
        (8, 1.15, 1.60, Vec3(0.26, 0.22, 0.20)),
        (2, 0.45, 2.10, Vec3(0.20, 0.18, 0.16)),
    )
    crt_index = 0
    for count, radius, z, extent in tiers:
        for k in range(count):
            theta = TAU * k / count
            crt_index += 1
            # Alternate circuits around each ring: 19 screens per circuit.
            channel = "ch_a" if crt_index % 2 == 1 else "ch_b"
            nodes.append(
                SceneNode(
                    node_id=f"crt_{crt_index:02d}",
                    kind="media_surface",
                    pose=Pose.at(radius * math.cos(theta), radius * math.sin(theta), z, wrap_angle(theta)),
                    extent=extent,
                    binding=Binding(channel_id=channel),
                )
            )
    for k in range(20):
        theta = TAU * k / 20
        nodes.append(
            SceneNode(
                node_id=f"neon_{k + 1:02d}",
                kind="neon_element",
                pose=Pose.at(2.55 * math.cos(theta), 2.55 * math.sin(theta), 1.2, wrap_angle(theta)),
                extent=Vec3(0.05, 0.05, 0.85),
            )
        )
    return SceneManifest(
        scene_id="vf",
        title="Versailles Fountain",
        artist="Nam June Paik",
        environment=Environment(kind="panorama", asset="assets/vf_panorama.png"),
        nodes=tuple(nodes),
        channels=(
            VideoChannel(
                channel_id="ch_a",
                playlist=LiteralPlaylist(
                    items=(
                        MediaItem(
                            media_id="vf_tape_a",
                            kind="video",
                            duration=24.0,
                            fps=25.0,
                            frame_count=600,
                            uri="assets/vf_tape_a.mp4",
                        ),
                    )
                ),
                fps=25.0,
                loop=True,
                delay_offset=0.0,
            ),
            VideoChannel(
                channel_id="ch_b",
                playlist=LiteralPlaylist(
                    items=(
                        MediaItem(
                            media_id="vf_tape_b",
                            kind="video",
                            duration=18.0,
                            fps=25.0,
                            frame_count=450,
                            uri="assets/vf_tape_b.mp4",
                        ),
                    )
                ),
                fps=25.0,
                loop=True,
                delay_offset=channel_b_delay,
            ),
        ),
        speakers=(
            Speaker(
                speaker_id="spk_left",
                position=Vec3(-2.8, 0.0, 1.4),
                source=SpeakerSource(channel_id="ch_a"),
                reference_gain=0.7,
                reference_distance=2.5,
            ),
            Speaker(
                speaker_id="spk_right",
                position=Vec3(2.8, 0.0, 1.4),
                source=SpeakerSource(channel_id="ch_b"),
                reference_gain=0.7,
                reference_distance=2.5,
            ),
        ),
    )


def _mc_scene() -> SceneManifest:
    nodes = []
    projectors = []
    speakers = []
    corners = ((1.8, 1.8), (-1.8, 1.8), (-1.8, -1.8), (1.8, -1.8))
    for i, (x, y) in enumerate(corners, start=1):
        nodes.append(
            SceneNode(
                node_id=f"cube_{i}",
                kind="media_surface",
                pose=Pose.at(x, y, 1.4, wrap_angle(math.atan2(-y, -x))),
                extent=Vec3(0.6, 0.6, 0.6),
                binding=Binding(projector_id=f"p_collage_{i}"),
            )
        )
        projectors.append(
            Projector(projector_id=f"p_collage_{i}", slot=f"collage_{i}", target_surface_ids=(f"cube_{i}",))
        )
        speakers.append(
            Speaker(
                speaker_id=f"spk_{i}",
                position=Vec3(x, y, 2.2),
                source=SpeakerSource(slot=f"collage_{i}"),
                reference_gain=0.8,
                reference_distance=2.0,
            )
        )
    widget = MenuWidget(
        widget_id="city_menu",
        pose=Pose.at(0.0, 0.0, 1.1),
        options=(
            CityOption(city_id="seoul", label="Seoul"),
            CityOption(city_id="karlsruhe", label="Karlsruhe"),
            CityOption(city_id="new_york", label="New York"),
        ),
        driven_slots=("collage_1", "collage_2", "collage_3", "collage_4"),
    )
    return SceneManifest(
        scene_id="mc",
        title="10.000 Moving Cities - Same but Different",
        artist="Marc Lee",
        environment=Environment(kind="modeled", asset="assets/mc_hall.glb"),
        nodes=tuple(nodes),
        projectors=tuple(projectors),
        speakers=tuple(speakers),
        widgets=(widget,),
    )


def builtin_scene(name: str, channel_b_delay: float = 0.0) -> SceneManifest:
    """Return a shipped fixture scene. ``channel_b_delay`` applies to "vf" only."""
    if name == "vf":
        return _vf_scene(channel_b_delay)
    if name == "mc":
        if channel_b_delay != 0.0:
            raise ValueError("channel_b_delay is only meaningful for the vf scene")
        return _mc_scene()
    raise UnknownSceneError(name)
