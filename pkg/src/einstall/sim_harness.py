"""Headless scripted visits: the deterministic stand-in for a human walker.

A WalkScript drives one simulated visit. move/idle actions set the walker's
locomotion mode, which persists until the next step (a 400-tick walk is one
script line, not 400); select_city is a one-shot input delivered during its
tick, so it takes effect on the following tick, exactly as a live client input
arriving between tick boundaries would.

Per tick the harness runs the full loop the live server implies:

    script -> sensors observe the true physical pose -> fuse ->
    compress_step (steered by the fused estimate) -> engine tick -> record

The walker follows its scripted intent exactly (ds, dtheta are body-frame
quantities under the walker's control), so the mapping's physical pose is
ground truth; sensing noise enters the loop only through the steering
decision, which is fed the fused pose estimate rather than the truth.

Traces are NDJSON: one header line, one record per tick. trace_hash chains
64-bit FNV-1a over the record lines, so any byte-level divergence between two
runs, or between a run and its persisted file, changes the hash.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .content_capsule import Capsule
from .determinism import FNV_OFFSET, SplitMix64, fnv1a64, mix_key
from .geometry import Pose, angle_diff
from .jsonio import dumps_compact
from .motion_compression import (
    CompressionConfig,
    MappingState,
    VirtDelta,
    Workspace,
    compress_step,
    reset_mapping,
)
from .protocol import Frame, FrameMapping, message_to_jsonable
from .reenactment_engine import (
    EngineConfig,
    SelectCity,
    SetPose,
    TickFrame,
    handle_input,
    init_engine,
    tick,
)
from .scene_model import SceneManifest
from .tracking import FusedEstimate, SensorConfig, fuse, ring8, simulate_readings

TRACE_VERSION = "trace/1"


class ScriptError(ValueError):
    """Raised for malformed or unsatisfiable walk scripts."""


@dataclass(frozen=True, slots=True)
class WalkStep:
    at_tick: int
    kind: str  # "move" | "idle" | "select_city"
    move: VirtDelta | None = None
    city_id: str | None = None


@dataclass(frozen=True, slots=True)
class WalkScript:
    steps: tuple[WalkStep, ...]

    def __post_init__(self) -> None:
        last = 0
        for step in self.steps:
            if step.at_tick <= last:
                raise ScriptError("at_tick values must be strictly increasing and >= 1")
            last = step.at_tick
            if step.kind == "move" and step.move is None:
                raise ScriptError("move steps need a delta")
            if step.kind == "select_city" and not step.city_id:
                raise ScriptError("select_city steps need a city_id")
            if step.kind not in ("move", "idle", "select_city"):
                raise ScriptError(f"unknown action kind {step.kind!r}")


def parse_walk_script(data: bytes | str) -> WalkScript:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ScriptError(f"invalid JSON at line {exc.lineno} column {exc.colno}") from None
    if not isinstance(doc, dict) or set(doc) != {"steps"} or not isinstance(doc["steps"], list):
        raise ScriptError("script must be an object with a 'steps' array")
    steps = []
    for i, raw in enumerate(doc["steps"]):
        where = f"steps[{i}]"
        if not isinstance(raw, dict) or set(raw) != {"at_tick", "action"}:
            raise ScriptError(f"{where}: keys must be exactly at_tick, action")
        at_tick = raw["at_tick"]
        if isinstance(at_tick, bool) or not isinstance(at_tick, int):
            raise ScriptError(f"{where}.at_tick: must be an integer")
        action = raw["action"]
        if action == "idle":
            steps.append(WalkStep(at_tick=at_tick, kind="idle"))
            continue
        if isinstance(action, dict) and set(action) == {"move"}:
            move = action["move"]
            if not isinstance(move, dict) or set(move) != {"ds", "dtheta"}:
                raise ScriptError(f"{where}.action.move: keys must be exactly ds, dtheta")
            try:
                delta = VirtDelta(ds=float(move["ds"]), dtheta=float(move["dtheta"]))
            except (TypeError, ValueError) as exc:
                raise ScriptError(f"{where}.action.move: {exc}") from None
            steps.append(WalkStep(at_tick=at_tick, kind="move", move=delta))
            continue
        if isinstance(action, dict) and set(action) == {"select_city"}:
            city = action["select_city"]
            if not isinstance(city, str) or not city:
                raise ScriptError(f"{where}.action.select_city: must be a non-empty string")
            steps.append(WalkStep(at_tick=at_tick, kind="select_city", city_id=city))
            continue
        raise ScriptError(f"{where}.action: must be \"idle\", {{\"move\": ...}} or {{\"select_city\": ...}}")
    return WalkScript(steps=tuple(steps))


def load_walk_script(path: str | Path) -> WalkScript:
    return parse_walk_script(Path(path).read_bytes())


def script_to_jsonable(script: WalkScript) -> dict:
    steps = []
    for step in script.steps:
        if step.kind == "idle":
            action: object = "idle"
        elif step.kind == "move":
            assert step.move is not None
            action = {"move": {"ds": step.move.ds, "dtheta": step.move.dtheta}}
        else:
            action = {"select_city": step.city_id}
        steps.append({"at_tick": step.at_tick, "action": action})
    return {"steps": steps}


@dataclass(frozen=True)
class Trace:
    header: dict
    records: tuple[dict, ...]
    lines: tuple[str, ...]  # header line first, then one line per record

    def trace_hash(self) -> str:
        h = FNV_OFFSET
        for line in self.lines[1:]:
            h = fnv1a64(line.encode("utf-8"), h)
        return f"{h:016x}"


@dataclass(frozen=True, slots=True)
class MetricsReport:
    frames: int
    tracking_rmse_pos: float
    tracking_rmse_yaw: float
    max_phys_excursion: float
    containment_violations: int
    kappa_saturation_fraction: float
    trace_hash: str

    def to_jsonable(self) -> dict:
        return {
            "frames": self.frames,
            "tracking_rmse_pos": self.tracking_rmse_pos,
            "tracking_rmse_yaw": self.tracking_rmse_yaw,
            "max_phys_excursion": self.max_phys_excursion,
            "containment_violations": self.containment_violations,
            "kappa_saturation_fraction": self.kappa_saturation_fraction,
            "trace_hash": self.trace_hash,
        }


def _pose_jsonable(pose: Pose) -> dict:
    return {"position": [pose.position.x, pose.position.y, pose.position.z], "yaw": pose.yaw}


def _record_jsonable(
    t_ticks: int,
    true_pose: Pose,
    fused: FusedEstimate,
    mapping: MappingState,
    kappa: float,
    frame: Frame,
) -> dict:
    return {
        "type": "TRACE_RECORD",
        "t_ticks": t_ticks,
        "true_pose": _pose_jsonable(true_pose),
        "fused": {
            "pose": _pose_jsonable(fused.pose),
            "var_pos": fused.var_pos,
            "var_yaw": fused.var_yaw,
            "used_sensors": list(fused.used_sensors),
        },
        "mapping": {
            "virt_pose": _pose_jsonable(mapping.virt_pose),
            "phys_pose": _pose_jsonable(mapping.phys_pose),
            "heading_offset": mapping.heading_offset,
        },
        "kappa": kappa,
        "frame": message_to_jsonable(frame),
    }


def run_scripted(
    manifest: SceneManifest,
    capsule: Capsule | None,
    script: WalkScript,
    ticks: int,
    engine_config: EngineConfig,
    compression: CompressionConfig | None = None,
    workspace: Workspace | None = None,
    sensors: tuple[SensorConfig, ...] | None = None,
) -> Trace:
    """Run one deterministic visit and return its full trace."""
    if ticks < 1:
        raise ScriptError("ticks must be >= 1")
    if script.steps and script.steps[-1].at_tick > ticks:
        raise ScriptError("script references ticks beyond the run length")
    compression = compression or CompressionConfig()
    workspace = workspace or Workspace()
    sensors = sensors if sensors is not None else ring8()

    state = init_engine(manifest, capsule, engine_config)
    mapping = reset_mapping(workspace, Pose.at(0.0, 0.0))
    state = handle_input(state, SetPose(mapping.virt_pose))
    # One CLI seed drives everything; the sensor stream gets its own lane.
    sensor_rng = SplitMix64(mix_key("harness-sensors", engine_config.rng_seed))

    steps_by_tick = {step.at_tick: step for step in script.steps}
    mode: VirtDelta = VirtDelta(0.0, 0.0)
    header = {
        "type": "TRACE_HEADER",
        "version": TRACE_VERSION,
        "scene_id": manifest.scene_id,
        "config": {
            "tick_rate": engine_config.tick_rate,
            "delay_emulation": engine_config.delay_emulation,
            "delay_offset": engine_config.delay_offset,
            "kappa_max": compression.kappa_max,
            "steer_gain": compression.steer_gain,
            "workspace": {"width": workspace.width, "depth": workspace.depth},
            "ticks": ticks,
            "sensor_count": len(sensors),
        },
        "seeds": {"engine": engine_config.rng_seed},
    }
    lines = [dumps_compact(header)]
    records: list[dict] = []

    for t in range(1, ticks + 1):
        pending_city: str | None = None
        step = steps_by_tick.get(t)
        if step is not None:
            if step.kind == "move":
                assert step.move is not None
                mode = step.move
            elif step.kind == "idle":
                mode = VirtDelta(0.0, 0.0)
            else:
                pending_city = step.city_id
        observed = mapping.phys_pose
        readings = simulate_readings(observed, sensors, sensor_rng, t=(t - 1) / engine_config.tick_rate)
        fused = fuse(readings)
        mapping, kappa = compress_step(
            mapping, mode, compression, workspace, steer_pose=fused.pose
        )
        state = handle_input(state, SetPose(mapping.virt_pose))
        state, tick_frame = tick(state)
        frame = _wire_frame(tick_frame, mapping)
        record = _record_jsonable(t, observed, fused, mapping, kappa, frame)
        records.append(record)
        lines.append(dumps_compact(record))
        if pending_city is not None:
            # Delivered during tick t: visible from tick t+1, like a live input.
            state = handle_input(state, SelectCity(city_id=pending_city))

    return Trace(header=header, records=tuple(records), lines=tuple(lines))


def _wire_frame(tf: TickFrame, mapping: MappingState) -> Frame:
    return Frame(
        seq=tf.t_ticks,
        t_ticks=tf.t_ticks,
        time=tf.time,
        user_virtual_pose=tf.user_virtual_pose,
        mapping=FrameMapping(phys_pose=mapping.phys_pose, heading_offset=mapping.heading_offset),
        surfaces=tf.surfaces,
        speaker_gains=tf.speaker_gains,
        selected_city=tf.menu.selected_city if tf.menu is not None else None,
    )


def write_trace(trace: Trace, path: str | Path) -> None:
    Path(path).write_text("\n".join(trace.lines) + "\n", encoding="utf-8")


def load_trace(path: str | Path) -> Trace:
    text = Path(path).read_text(encoding="utf-8")
    lines = [line for line in text.split("\n") if line]
    if not lines:
        raise ValueError("trace file is empty")
    header = json.loads(lines[0])
    if not isinstance(header, dict) or header.get("type") != "TRACE_HEADER":
        raise ValueError("first line must be a TRACE_HEADER")
    if header.get("version") != TRACE_VERSION:
        raise ValueError(f"unsupported trace version {header.get('version')!r}")
    records = []
    for i, line in enumerate(lines[1:], start=2):
        rec = json.loads(line)
        if not isinstance(rec, dict) or rec.get("type") != "TRACE_RECORD":
            raise ValueError(f"line {i}: expected a TRACE_RECORD")
        records.append(rec)
    return Trace(header=header, records=tuple(records), lines=tuple(lines))


def compute_metrics(trace: Trace) -> MetricsReport:
    """Summarize a trace; all figures derive only from the trace contents."""
    if not trace.records:
        raise ValueError("trace has no records")
    config = trace.header.get("config", {})
    kappa_max = float(config.get("kappa_max", 0.0))
    ws = config.get("workspace", {})
    half_w = float(ws.get("width", 0.0)) / 2
    half_d = float(ws.get("depth", 0.0)) / 2

    sq_pos = 0.0
    sq_yaw = 0.0
    max_excursion = 0.0
    violations = 0
    saturated = 0
    for rec in trace.records:
        tp = rec["true_pose"]
        fp = rec["fused"]["pose"]
        dx = fp["position"][0] - tp["position"][0]
        dy = fp["position"][1] - tp["position"][1]
        dz = fp["position"][2] - tp["position"][2]
        sq_pos += dx * dx + dy * dy + dz * dz
        dyaw = angle_diff(fp["yaw"], tp["yaw"])
        sq_yaw += dyaw * dyaw
        px, py, _ = rec["mapping"]["phys_pose"]["position"]
        max_excursion = max(max_excursion, math.hypot(px, py))
        if abs(px) > half_w or abs(py) > half_d:
            violations += 1
        if abs(rec["kappa"]) >= kappa_max - 1e-12:
            saturated += 1
    n = len(trace.records)
    return MetricsReport(
        frames=n,
        tracking_rmse_pos=math.sqrt(sq_pos / n),
        tracking_rmse_yaw=math.sqrt(sq_yaw / n),
        max_phys_excursion=max_excursion,
        containment_violations=violations,
        kappa_saturation_fraction=saturated / n,
        trace_hash=trace.trace_hash(),
    )
