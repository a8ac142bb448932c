"""Spatial value types shared across the package.

Lengths are meters, angles radians. Yaw is the only orientation degree of
freedom; it is kept normalized to [-pi, pi) so poses compare bit-stably.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TAU = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Normalize an angle to [-pi, pi).

    The extra clamp guards against float rounding in the modulo pushing the
    result onto the excluded upper boundary.
    """
    r = (a + math.pi) % TAU
    if r >= TAU:
        r -= TAU
    r -= math.pi
    if r >= math.pi:
        r = -math.pi
    return r


def angle_diff(a: float, b: float) -> float:
    """Signed smallest rotation from b to a, in [-pi, pi)."""
    return wrap_angle(a - b)


@dataclass(frozen=True, slots=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "z"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"Vec3.{name} must be finite, got {v!r}")

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def distance_to(self, other: "Vec3") -> float:
        return (self - other).norm()


@dataclass(frozen=True, slots=True)
class Pose:
    """Position plus heading (yaw about +z, normalized to [-pi, pi))."""

    position: Vec3
    yaw: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.yaw):
            raise ValueError(f"Pose.yaw must be finite, got {self.yaw!r}")
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    @staticmethod
    def at(x: float, y: float, z: float = 0.0, yaw: float = 0.0) -> "Pose":
        return Pose(Vec3(x, y, z), yaw)
