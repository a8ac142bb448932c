"""Motion compression: unbounded virtual walking in a bounded workspace.

The user walks the virtual world; the controller injects bounded extra
curvature into the physical path so the body stays near the workspace center
while the virtual path remains exactly what was walked. Both poses advance by
exact unicycle integration, so arc length is preserved to machine precision
and a constant injection on a straight virtual walk traces a perfect physical
circle of radius 1/kappa.

Steering law: kappa = clamp(gain * (cross(h, c) + max(0, -dot(h, c)))), where
h is the physical heading and c the unit vector toward the workspace center.
The cross term alone has a blind spot: walking exactly away from the center it
is zero, and the controller would happily beeline out of the workspace. The
dot term turns "pointing away" into a full-strength (left) turn command,
removing that equilibrium. With the default gain and curvature bound the
forward orbit radius (1/kappa_max = 0.4 m) fits the 2.5 m x 2.0 m workspace
with margin, which is what makes long straight virtual walks containable.

compress_step exposes two hooks: forced_kappa pins the injection (used to
demonstrate the straight-to-circle behavior), and steer_pose lets a caller
steer from a sensed pose estimate instead of ground truth, which is how the
tracking loop closes in the harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Pose, Vec3, wrap_angle

STRAIGHT_EPS = 1e-12
PREDICT_SPACING = 0.25
STATIONARY_EPS = 1e-3
MAX_STEP_DS = 0.2


@dataclass(frozen=True, slots=True)
class Workspace:
    width: float = 2.5
    depth: float = 2.0

    def __post_init__(self) -> None:
        if not (self.width > 0 and self.depth > 0):
            raise ValueError("workspace dimensions must be positive")

    def contains(self, p: Vec3) -> bool:
        return abs(p.x) <= self.width / 2 and abs(p.y) <= self.depth / 2


@dataclass(frozen=True, slots=True)
class CompressionConfig:
    kappa_max: float = 2.5
    steer_gain: float = 2.5
    predictor_horizon: float = 2.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.kappa_max) and self.kappa_max > 0):
            raise ValueError("kappa_max must be positive")
        if not (math.isfinite(self.steer_gain) and self.steer_gain >= 0):
            raise ValueError("steer_gain must be >= 0")
        if not (math.isfinite(self.predictor_horizon) and self.predictor_horizon >= 0):
            raise ValueError("predictor_horizon must be >= 0")


@dataclass(frozen=True, slots=True)
class VirtDelta:
    """One step of walking: arc length and heading change in the body frame."""

    ds: float
    dtheta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.ds) and 0 <= self.ds <= MAX_STEP_DS):
            raise ValueError(f"ds must be in [0, {MAX_STEP_DS}] per step")
        if not math.isfinite(self.dtheta):
            raise ValueError("dtheta must be finite")


@dataclass(frozen=True, slots=True)
class MappingState:
    phys_pose: Pose
    virt_pose: Pose
    heading_offset: float


def reset_mapping(workspace: Workspace, virt_start: Pose) -> MappingState:
    """Start a session: body at the workspace center facing +x, mind at virt_start."""
    phys = Pose.at(0.0, 0.0, 0.0, 0.0)
    return MappingState(
        phys_pose=phys,
        virt_pose=virt_start,
        heading_offset=wrap_angle(phys.yaw - virt_start.yaw),
    )


def _advance(pose: Pose, ds: float, dtheta: float) -> Pose:
    """Exact unicycle step: straight segment or circular arc of radius ds/dtheta."""
    yaw = pose.yaw
    if abs(dtheta) < STRAIGHT_EPS:
        dx = ds * math.cos(yaw)
        dy = ds * math.sin(yaw)
    else:
        r = ds / dtheta
        dx = r * (math.sin(yaw + dtheta) - math.sin(yaw))
        dy = r * (math.cos(yaw) - math.cos(yaw + dtheta))
    return Pose(
        position=Vec3(pose.position.x + dx, pose.position.y + dy, pose.position.z),
        yaw=wrap_angle(yaw + dtheta),
    )


def steering_kappa(phys_pose: Pose, config: CompressionConfig, workspace: Workspace) -> float:
    """Curvature command pulling the walker toward the workspace center."""
    to_center_x = -phys_pose.position.x
    to_center_y = -phys_pose.position.y
    dist = math.hypot(to_center_x, to_center_y)
    if dist < 1e-9:
        return 0.0
    cx = to_center_x / dist
    cy = to_center_y / dist
    hx = math.cos(phys_pose.yaw)
    hy = math.sin(phys_pose.yaw)
    cross = hx * cy - hy * cx
    dot = hx * cx + hy * cy
    command = config.steer_gain * (cross + max(0.0, -dot))
    return max(-config.kappa_max, min(config.kappa_max, command))


def compress_step(
    mapping: MappingState,
    delta: VirtDelta,
    config: CompressionConfig,
    workspace: Workspace,
    forced_kappa: float | None = None,
    steer_pose: Pose | None = None,
) -> tuple[MappingState, float]:
    """Advance one step; returns the new mapping and the injected curvature.

    The virtual pose advances by exactly (ds, dtheta); the physical pose by
    (ds, dtheta + kappa*ds) with |kappa| <= kappa_max, so physical arc length
    equals virtual arc length and the per-step heading distortion is bounded.
    """
    if forced_kappa is not None:
        kappa = max(-config.kappa_max, min(config.kappa_max, forced_kappa))
    else:
        kappa = steering_kappa(steer_pose if steer_pose is not None else mapping.phys_pose, config, workspace)
    virt = _advance(mapping.virt_pose, delta.ds, delta.dtheta)
    phys = _advance(mapping.phys_pose, delta.ds, delta.dtheta + kappa * delta.ds)
    return (
        MappingState(phys_pose=phys, virt_pose=virt, heading_offset=wrap_angle(phys.yaw - virt.yaw)),
        kappa,
    )


def predict_path(history: list[Pose] | tuple[Pose, ...], horizon: float) -> list[Vec3]:
    """Straight-line path forecast from the latest pose along its heading.

    Sampled every 0.25 m out to the horizon; a history whose accumulated
    displacement is under 1 mm is treated as stationary and collapses to the
    current position.
    """
    if not history:
        raise ValueError("history must contain at least one pose")
    latest = history[-1]
    walked = sum(
        history[i + 1].position.distance_to(history[i].position) for i in range(len(history) - 1)
    )
    if walked < STATIONARY_EPS or horizon < PREDICT_SPACING:
        return [latest.position]
    n = int(math.floor(horizon / PREDICT_SPACING + 1e-9))
    dx = math.cos(latest.yaw)
    dy = math.sin(latest.yaw)
    p = latest.position
    return [Vec3(p.x + dx * PREDICT_SPACING * i, p.y + dy * PREDICT_SPACING * i, p.z) for i in range(1, n + 1)]


def mapping_snapshot(mapping: MappingState) -> dict:
    """Plain-value view of the mapping for traces and wire frames."""
    return {
        "virt_pose": mapping.virt_pose,
        "phys_pose": mapping.phys_pose,
        "heading_offset": mapping.heading_offset,
    }
