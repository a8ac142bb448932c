"""Sensor visibility, noisy readings, fusion, and scheduling."""

from __future__ import annotations

import itertools
import math
from dataclasses import replace
from fractions import Fraction

import pytest
from pytest import approx

from einstall.determinism import SplitMix64
from einstall.geometry import Pose, Vec3, angle_diff, wrap_angle
from einstall.tracking import (
    MIN_STD,
    SensorConfig,
    SensorReading,
    TrackingLostError,
    fuse,
    load_sensors,
    parse_sensors,
    ring8,
    schedule_sensors,
    sees,
    serialize_sensors,
    simulate_readings,
)


def sensor(
    sensor_id="s",
    position=Vec3(0.0, 0.0, 0.0),
    facing_yaw=0.0,
    fov=math.pi / 2,
    max_range=5.0,
    noise_std_pos=0.02,
    noise_std_yaw=0.03,
) -> SensorConfig:
    return SensorConfig(
        sensor_id=sensor_id,
        position=position,
        facing_yaw=facing_yaw,
        fov=fov,
        max_range=max_range,
        noise_std_pos=noise_std_pos,
        noise_std_yaw=noise_std_yaw,
    )


def reading(sensor_id: str, pose: Pose | None, std_pos=0.02, std_yaw=0.03) -> SensorReading:
    return SensorReading(
        sensor_id=sensor_id,
        t=0.0,
        measured=pose,
        visible=pose is not None,
        noise_std_pos=std_pos,
        noise_std_yaw=std_yaw,
    )


# -- visibility -------------------------------------------------------------------


def test_sees_boundaries_are_inclusive():
    s = sensor()
    assert sees(s, Pose.at(3.0, 3.0))  # bearing exactly fov/2
    assert sees(s, Pose.at(5.0, 0.0))  # distance exactly max_range
    assert not sees(s, Pose.at(5.0 + 1e-9, 0.0))
    assert not sees(s, Pose.at(3.0, 3.001))  # just past the half-angle
    assert not sees(s, Pose.at(-1.0, 0.0))  # behind


def test_sees_degenerate_directions():
    s = sensor(fov=0.1)
    assert sees(s, Pose.at(0.0, 0.0))  # coincident
    assert sees(s, Pose(Vec3(0.0, 0.0, 2.0), 0.0))  # straight above: no bearing
    assert not sees(s, Pose(Vec3(0.0, 0.0, 6.0), 0.0))  # straight above, out of range


def test_sees_uses_3d_range_but_planar_bearing():
    s = sensor(max_range=2.0)
    assert sees(s, Pose(Vec3(1.0, 0.0, 1.0), 0.0))
    assert not sees(s, Pose(Vec3(1.0, 0.0, 1.9), 0.0))  # 3D distance 2.15


def test_sensor_config_validation():
    with pytest.raises(ValueError):
        sensor(fov=0.0)
    with pytest.raises(ValueError):
        sensor(fov=math.pi + 0.1)
    with pytest.raises(ValueError):
        sensor(max_range=0.0)
    with pytest.raises(ValueError):
        sensor(noise_std_pos=-0.1)
    with pytest.raises(ValueError):
        sensor(sensor_id="")


# -- simulated readings ---------------------------------------------------------------


def test_simulate_readings_draw_order_replay():
    sensors = (
        sensor("a", Vec3(-2.0, 0.0, 0.0)),
        sensor("b", Vec3(2.0, 0.0, 0.0)),  # faces +x: target behind it
        sensor("c", Vec3(0.0, -2.0, 0.0), facing_yaw=math.pi / 2),
    )
    true_pose = Pose.at(0.0, 0.0, 0.0, yaw=0.4)
    assert [sees(s, true_pose) for s in sensors] == [True, False, True]

    readings = simulate_readings(true_pose, sensors, SplitMix64(31), t=1.25)
    mirror = SplitMix64(31)
    for s, r in zip(sensors, readings):
        assert r.sensor_id == s.sensor_id
        assert r.t == 1.25
        assert (r.noise_std_pos, r.noise_std_yaw) == (s.noise_std_pos, s.noise_std_yaw)
        if not sees(s, true_pose):
            assert r.measured is None and not r.visible
            continue
        nx = mirror.next_gaussian() * s.noise_std_pos
        ny = mirror.next_gaussian() * s.noise_std_pos
        nz = mirror.next_gaussian() * s.noise_std_pos
        nyaw = mirror.next_gaussian() * s.noise_std_yaw
        assert r.measured == Pose(
            Vec3(true_pose.position.x + nx, true_pose.position.y + ny, true_pose.position.z + nz),
            wrap_angle(true_pose.yaw + nyaw),
        )


def test_invisible_sensors_consume_no_randomness():
    visible_only = (sensor("a", Vec3(-2.0, 0.0, 0.0)),)
    with_blocked = (sensor("blocked", Vec3(2.0, 0.0, 0.0)),) + visible_only
    pose = Pose.at(0.0, 0.0)
    direct = simulate_readings(pose, visible_only, SplitMix64(5))
    padded = simulate_readings(pose, with_blocked, SplitMix64(5))
    assert padded[1].measured == direct[0].measured


def test_zero_noise_reads_exactly():
    sensors = (sensor("a", Vec3(-2.0, 0.0, 0.0), noise_std_pos=0.0, noise_std_yaw=0.0),)
    pose = Pose.at(0.3, -0.2, 0.1, yaw=1.1)
    (r,) = simulate_readings(pose, sensors, SplitMix64(0))
    assert r.measured == pose


# -- fusion -----------------------------------------------------------------------------


def test_fuse_requires_a_visible_reading():
    with pytest.raises(TrackingLostError, match="tracking lost"):
        fuse([reading("a", None)])
    with pytest.raises(TrackingLostError):
        fuse([])


def test_fuse_matches_manual_inverse_variance():
    r1 = reading("a", Pose.at(1.0, 0.0, 0.0, yaw=0.1), std_pos=0.02, std_yaw=0.05)
    r2 = reading("b", Pose.at(0.0, 1.0, 0.4, yaw=0.3), std_pos=0.03, std_yaw=0.05)
    est = fuse([r2, r1, reading("c", None)])

    w1, w2 = 1.0 / 0.02**2, 1.0 / 0.03**2
    assert est.pose.position.x == approx((w1 * 1.0) / (w1 + w2))
    assert est.pose.position.y == approx((w2 * 1.0) / (w1 + w2))
    assert est.pose.position.z == approx((w2 * 0.4) / (w1 + w2))
    assert est.var_pos == approx(1.0 / (w1 + w2))
    wy = 1.0 / 0.05**2
    expected_yaw = math.atan2(
        wy * (math.sin(0.1) + math.sin(0.3)), wy * (math.cos(0.1) + math.cos(0.3))
    )
    assert est.pose.yaw == approx(expected_yaw)
    assert est.var_yaw == approx(1.0 / (2 * wy))
    assert est.used_sensors == ("a", "b")


def test_fuse_yaw_is_circular_across_the_seam():
    deg170 = math.radians(170.0)
    est = fuse(
        [
            reading("a", Pose.at(0.0, 0.0, yaw=deg170)),
            reading("b", Pose.at(0.0, 0.0, yaw=-deg170)),
        ]
    )
    assert abs(angle_diff(est.pose.yaw, math.pi)) < 1e-9


def test_fuse_floors_zero_stddev():
    exact = reading("a", Pose.at(0.5, 0.5, yaw=0.2), std_pos=0.0, std_yaw=0.0)
    coarse = reading("b", Pose.at(-2.0, -2.0, yaw=-2.0), std_pos=0.5, std_yaw=0.5)
    est = fuse([exact, coarse])
    assert est.pose.position.x == approx(0.5, abs=1e-6)
    assert est.var_pos <= MIN_STD**2 * 1.0000001


# -- scheduling ---------------------------------------------------------------------------


def exact_weight(std: float) -> Fraction:
    return 1 / Fraction(max(std, MIN_STD)) ** 2


def brute_force_schedule(sensors, pose: Pose, k: int) -> list[str]:
    """Exhaustive minimum-variance subset, exact arithmetic, id tie-break."""
    visible = [s for s in sensors if sees(s, pose)]
    size = min(k, len(visible))
    best: tuple[Fraction, tuple[str, ...]] | None = None
    for combo in itertools.combinations(visible, size):
        weight = sum((exact_weight(s.noise_std_pos) for s in combo), Fraction(0))
        ids = tuple(sorted(s.sensor_id for s in combo))
        key = (-weight, ids)
        if best is None or key < best:
            best = key
    assert best is not None
    return list(best[1])


def mixed_ring() -> tuple[SensorConfig, ...]:
    stds = (0.05, 0.02, 0.04, 0.02, 0.08, 0.01, 0.03, 0.04)
    return tuple(replace(s, noise_std_pos=std) for s, std in zip(ring8(), stds))


def random_workspace_pose(rng: SplitMix64) -> Pose:
    return Pose.at(
        (rng.next_double() - 0.5) * 2.5,
        (rng.next_double() - 0.5) * 2.0,
        0.8 + rng.next_double() * 1.2,
        yaw=(rng.next_double() - 0.5) * 2 * math.pi,
    )


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_schedule_matches_brute_force(k):
    rng = SplitMix64(808)
    sensors = mixed_ring()
    for _ in range(25):
        pose = random_workspace_pose(rng)
        assert schedule_sensors(sensors, pose, k) == brute_force_schedule(sensors, pose, k)


def test_schedule_tie_breaks_by_sensor_id():
    tied = tuple(
        sensor(sid, Vec3(-2.0, 0.0, 0.0), noise_std_pos=0.02) for sid in ("delta", "bravo", "echo")
    )
    assert schedule_sensors(tied, Pose.at(0.0, 0.0), 2) == ["bravo", "delta"]


def test_schedule_rejects_non_positive_k():
    with pytest.raises(ValueError):
        schedule_sensors(ring8(), Pose.at(0.0, 0.0), 0)


def test_schedule_returns_all_when_k_exceeds_visible():
    one = (sensor("only", Vec3(-2.0, 0.0, 0.0)),)
    assert schedule_sensors(one, Pose.at(0.0, 0.0), 4) == ["only"]


# -- the shipped ring ------------------------------------------------------------------------


def test_ring8_shape():
    sensors = ring8()
    assert [s.sensor_id for s in sensors] == [f"k{i:02d}" for i in range(1, 9)]
    spots = [(s.position.x, s.position.y) for s in sensors]
    assert spots == [
        (1.25, 1.0),
        (0.0, 1.0),
        (-1.25, 1.0),
        (-1.25, 0.0),
        (-1.25, -1.0),
        (0.0, -1.0),
        (1.25, -1.0),
        (1.25, 0.0),
    ]
    for s in sensors:
        assert s.position.z == 1.6
        assert s.fov == approx(math.radians(70.0))
        assert s.max_range == 4.0
        assert (s.noise_std_pos, s.noise_std_yaw) == (0.02, 0.03)
        assert s.facing_yaw == approx(wrap_angle(math.atan2(-s.position.y, -s.position.x)))


def test_ring8_sees_center_with_all_eight():
    center = Pose.at(0.0, 0.0, 1.6)
    assert all(sees(s, center) for s in ring8())


def test_ring8_covers_the_workspace():
    sensors = ring8()
    for xi in range(-6, 7, 2):
        for yi in range(-4, 5, 2):
            pose = Pose.at(xi * 0.2, yi * 0.2, 1.5)
            visible = sum(sees(s, pose) for s in sensors)
            assert visible >= 2, f"thin coverage at {pose.position}"


def test_ring8_fixture_file_in_sync(repo_root):
    path = repo_root / "sensors" / "ring8.json"
    assert path.read_text(encoding="utf-8") == serialize_sensors(ring8())
    assert load_sensors(path) == ring8()


def test_parse_sensors_round_trip_and_errors():
    sensors = ring8()
    assert parse_sensors(serialize_sensors(sensors)) == sensors
    with pytest.raises(ValueError, match="sensors"):
        parse_sensors('{"not_sensors": []}')
    with pytest.raises(ValueError, match="keys must be exactly"):
        parse_sensors('{"sensors": [{"sensor_id": "a"}]}')


# -- fused accuracy ----------------------------------------------------------------------------


def test_fused_beats_best_single_sensor():
    sensors = ring8()
    rng = SplitMix64(99)
    true_pose = Pose.at(0.0, 0.0, 1.6)
    fused_sq = 0.0
    single_sq: dict[str, float] = {s.sensor_id: 0.0 for s in sensors}
    single_n: dict[str, int] = {s.sensor_id: 0 for s in sensors}
    n = 2000
    for _ in range(n):
        readings = simulate_readings(true_pose, sensors, rng)
        est = fuse(readings)
        fused_sq += (est.pose.position - true_pose.position).norm() ** 2
        for r in readings:
            if r.visible:
                single_sq[r.sensor_id] += (r.measured.position - true_pose.position).norm() ** 2
                single_n[r.sensor_id] += 1
    fused_rmse = math.sqrt(fused_sq / n)
    best_single = min(
        math.sqrt(sq / cnt) for sid, sq in single_sq.items() if (cnt := single_n[sid]) > 0
    )
    assert fused_rmse < best_single
