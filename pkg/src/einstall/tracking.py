"""Simulated multi-sensor head tracking and fusion.

A ring of depth sensors watches the physical workspace. Each simulation step
produces one reading per sensor: visible or not (range and field-of-view test
against the true pose) and, when visible, the true pose perturbed by the
sensor's own Gaussian noise. Readings are fused by inverse-variance weighting,
with yaw averaged on the circle so estimates near the wrap-around stay sane.

Sensor scheduling picks the k-sensor subset that minimizes the fused position
variance among the sensors that would see a predicted pose. Because the fused
variance is 1/sum(1/sigma_i^2), the optimum is exactly the k smallest noise
values; the greedy selection below therefore matches exhaustive subset search,
with ties broken toward the lexicographically smallest id list.

Noise draw order is part of the contract: for each visible sensor, in sensor
list order, exactly four Gaussians are consumed (x, y, z, yaw). Skipped
sensors consume nothing. This keeps traces reproducible across runtimes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .determinism import SplitMix64
from .geometry import Pose, Vec3, angle_diff, wrap_angle
from .jsonio import dumps_pretty

# Weights are 1/std^2 with stds floored here, so ideal (zero-noise) sensors
# keep the variance finite and positive instead of dividing by zero.
MIN_STD = 1e-9


class TrackingLostError(RuntimeError):
    def __init__(self) -> None:
        super().__init__("tracking lost: no visible sensor readings")


@dataclass(frozen=True, slots=True)
class SensorConfig:
    sensor_id: str
    position: Vec3
    facing_yaw: float
    fov: float
    max_range: float
    noise_std_pos: float
    noise_std_yaw: float

    def __post_init__(self) -> None:
        if not self.sensor_id:
            raise ValueError("sensor_id must be non-empty")
        if not (0 < self.fov <= math.pi):
            raise ValueError("fov must be in (0, pi]")
        if not (math.isfinite(self.max_range) and self.max_range > 0):
            raise ValueError("max_range must be positive")
        if self.noise_std_pos < 0 or self.noise_std_yaw < 0:
            raise ValueError("noise stds must be >= 0")


@dataclass(frozen=True, slots=True)
class SensorReading:
    """One sensor's report. measured is None exactly when visible is False."""

    sensor_id: str
    t: float
    measured: Pose | None
    visible: bool
    noise_std_pos: float
    noise_std_yaw: float


@dataclass(frozen=True, slots=True)
class FusedEstimate:
    pose: Pose
    var_pos: float
    var_yaw: float
    used_sensors: tuple[str, ...]


def sees(sensor: SensorConfig, target: Pose) -> bool:
    """Range and horizontal field-of-view test; both boundaries inclusive."""
    delta = target.position - sensor.position
    if delta.norm() > sensor.max_range:
        return False
    if delta.x == 0.0 and delta.y == 0.0:
        return True
    bearing = math.atan2(delta.y, delta.x)
    return abs(angle_diff(bearing, sensor.facing_yaw)) <= sensor.fov / 2


def simulate_readings(
    true_pose: Pose, sensors: list[SensorConfig] | tuple[SensorConfig, ...], rng: SplitMix64, t: float = 0.0
) -> list[SensorReading]:
    """One reading per sensor, noise drawn as (x, y, z, yaw) in sensor order."""
    readings = []
    for sensor in sensors:
        if not sees(sensor, true_pose):
            readings.append(
                SensorReading(
                    sensor_id=sensor.sensor_id,
                    t=t,
                    measured=None,
                    visible=False,
                    noise_std_pos=sensor.noise_std_pos,
                    noise_std_yaw=sensor.noise_std_yaw,
                )
            )
            continue
        nx = rng.next_gaussian() * sensor.noise_std_pos
        ny = rng.next_gaussian() * sensor.noise_std_pos
        nz = rng.next_gaussian() * sensor.noise_std_pos
        nyaw = rng.next_gaussian() * sensor.noise_std_yaw
        measured = Pose(
            position=Vec3(true_pose.position.x + nx, true_pose.position.y + ny, true_pose.position.z + nz),
            yaw=wrap_angle(true_pose.yaw + nyaw),
        )
        readings.append(
            SensorReading(
                sensor_id=sensor.sensor_id,
                t=t,
                measured=measured,
                visible=True,
                noise_std_pos=sensor.noise_std_pos,
                noise_std_yaw=sensor.noise_std_yaw,
            )
        )
    return readings


def fuse(readings: list[SensorReading]) -> FusedEstimate:
    """Inverse-variance fusion of the visible readings.

    Position axes use weight 1/noise_std_pos^2; yaw uses the weighted circular
    mean with weight 1/noise_std_yaw^2. The reported variances are 1/sum(w).
    """
    visible = [r for r in readings if r.visible]
    if not visible:
        raise TrackingLostError()
    w_pos_sum = 0.0
    w_yaw_sum = 0.0
    x = y = z = 0.0
    sin_sum = cos_sum = 0.0
    for r in visible:
        assert r.measured is not None
        w_pos = 1.0 / max(r.noise_std_pos, MIN_STD) ** 2
        w_yaw = 1.0 / max(r.noise_std_yaw, MIN_STD) ** 2
        w_pos_sum += w_pos
        w_yaw_sum += w_yaw
        x += w_pos * r.measured.position.x
        y += w_pos * r.measured.position.y
        z += w_pos * r.measured.position.z
        sin_sum += w_yaw * math.sin(r.measured.yaw)
        cos_sum += w_yaw * math.cos(r.measured.yaw)
    pose = Pose(
        position=Vec3(x / w_pos_sum, y / w_pos_sum, z / w_pos_sum),
        yaw=wrap_angle(math.atan2(sin_sum, cos_sum)),
    )
    return FusedEstimate(
        pose=pose,
        var_pos=1.0 / w_pos_sum,
        var_yaw=1.0 / w_yaw_sum,
        used_sensors=tuple(sorted(r.sensor_id for r in visible)),
    )


def schedule_sensors(
    sensors: list[SensorConfig] | tuple[SensorConfig, ...], predicted_pose: Pose, k: int
) -> list[str]:
    """The k-sensor visible subset minimizing fused position variance.

    Fused variance only ever shrinks as sensors are added, and each sensor's
    contribution 1/sigma^2 is independent of the others, so the optimal subset
    is the k visible sensors with the smallest noise_std_pos. Ties go to the
    smaller sensor_id, which yields the lexicographically smallest id list.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    visible = [s for s in sensors if sees(s, predicted_pose)]
    ranked = sorted(visible, key=lambda s: (s.noise_std_pos, s.sensor_id))
    return sorted(s.sensor_id for s in ranked[:k])


# -- fixture -----------------------------------------------------------------

def ring8() -> tuple[SensorConfig, ...]:
    """Eight perimeter sensors around the walkable workspace, all facing center.

    Mounted at head height on the boundary of the 2.5 m x 2.0 m floor area:
    four corners plus four edge midpoints, 70-degree field of view, 4 m range.
    Together they cover the entire workspace with generous overlap.
    """
    spots = (
        (1.25, 1.0),
        (0.0, 1.0),
        (-1.25, 1.0),
        (-1.25, 0.0),
        (-1.25, -1.0),
        (0.0, -1.0),
        (1.25, -1.0),
        (1.25, 0.0),
    )
    return tuple(
        SensorConfig(
            sensor_id=f"k{i + 1:02d}",
            position=Vec3(x, y, 1.6),
            facing_yaw=wrap_angle(math.atan2(-y, -x)),
            fov=70.0 * math.pi / 180.0,
            max_range=4.0,
            noise_std_pos=0.02,
            noise_std_yaw=0.03,
        )
        for i, (x, y) in enumerate(spots)
    )


def sensors_to_jsonable(sensors: tuple[SensorConfig, ...] | list[SensorConfig]) -> dict:
    return {
        "sensors": [
            {
                "sensor_id": s.sensor_id,
                "position": [s.position.x, s.position.y, s.position.z],
                "facing_yaw": s.facing_yaw,
                "fov": s.fov,
                "max_range": s.max_range,
                "noise_std_pos": s.noise_std_pos,
                "noise_std_yaw": s.noise_std_yaw,
            }
            for s in sensors
        ]
    }


def serialize_sensors(sensors: tuple[SensorConfig, ...] | list[SensorConfig]) -> str:
    return dumps_pretty(sensors_to_jsonable(sensors))


def parse_sensors(data: bytes | str) -> tuple[SensorConfig, ...]:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    doc = json.loads(data)
    if not isinstance(doc, dict) or set(doc) != {"sensors"} or not isinstance(doc["sensors"], list):
        raise ValueError("sensor fixture must be an object with a 'sensors' array")
    out = []
    keys = ("sensor_id", "position", "facing_yaw", "fov", "max_range", "noise_std_pos", "noise_std_yaw")
    for i, raw in enumerate(doc["sensors"]):
        if not isinstance(raw, dict) or set(raw) != set(keys):
            raise ValueError(f"sensors[{i}]: keys must be exactly {list(keys)}")
        pos = raw["position"]
        if not (isinstance(pos, list) and len(pos) == 3 and all(isinstance(v, (int, float)) for v in pos)):
            raise ValueError(f"sensors[{i}].position: must be an array of 3 numbers")
        out.append(
            SensorConfig(
                sensor_id=raw["sensor_id"],
                position=Vec3(float(pos[0]), float(pos[1]), float(pos[2])),
                facing_yaw=float(raw["facing_yaw"]),
                fov=float(raw["fov"]),
                max_range=float(raw["max_range"]),
                noise_std_pos=float(raw["noise_std_pos"]),
                noise_std_yaw=float(raw["noise_std_yaw"]),
            )
        )
    return tuple(out)


def load_sensors(path: str | Path) -> tuple[SensorConfig, ...]:
    return parse_sensors(Path(path).read_bytes())
