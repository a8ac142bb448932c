"""Angle wrapping and spatial value types."""

from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st
from pytest import approx

from einstall.geometry import TAU, Pose, Vec3, angle_diff, wrap_angle


def test_wrap_angle_reference_points():
    assert wrap_angle(0.0) == 0.0
    assert wrap_angle(math.pi) == -math.pi
    assert wrap_angle(-math.pi) == -math.pi
    assert wrap_angle(2 * math.pi) == approx(0.0, abs=1e-15)
    assert wrap_angle(math.pi + 0.25) == approx(-math.pi + 0.25)
    assert wrap_angle(-math.pi - 0.25) == approx(math.pi - 0.25)


@given(st.floats(min_value=-1e7, max_value=1e7, allow_nan=False))
def test_wrap_angle_lands_in_half_open_interval(a):
    r = wrap_angle(a)
    assert -math.pi <= r < math.pi


@given(st.floats(min_value=-50.0, max_value=50.0), st.integers(min_value=-3, max_value=3))
def test_wrap_angle_is_periodic(a, k):
    assert abs(angle_diff(wrap_angle(a + k * TAU), wrap_angle(a))) < 1e-9


def test_angle_diff_examples():
    assert angle_diff(0.2, 0.1) == approx(0.1)
    assert angle_diff(-math.pi + 0.1, math.pi - 0.1) == approx(0.2)
    assert angle_diff(math.pi - 0.1, -math.pi + 0.1) == approx(-0.2)


@given(st.floats(min_value=-10.0, max_value=10.0), st.floats(min_value=-10.0, max_value=10.0))
def test_angle_diff_is_antisymmetric_modulo_tau(a, b):
    d1 = angle_diff(a, b)
    d2 = angle_diff(b, a)
    assert abs(wrap_angle(d1 + d2)) < 1e-9


def test_vec3_algebra():
    a, b = Vec3(1.0, 2.0, 3.0), Vec3(4.0, 6.0, 8.0)
    assert b - a == Vec3(3.0, 4.0, 5.0)
    assert a + b == Vec3(5.0, 8.0, 11.0)
    assert (b - a).norm() == approx(math.sqrt(50.0))
    assert a.distance_to(b) == (b - a).norm()
    assert Vec3(0.0, 0.0, 0.0).norm() == 0.0


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
@pytest.mark.parametrize("axis", [0, 1, 2])
def test_vec3_rejects_non_finite(bad, axis):
    coords = [0.0, 0.0, 0.0]
    coords[axis] = bad
    with pytest.raises(ValueError):
        Vec3(*coords)


def test_pose_normalizes_yaw_on_construction():
    assert Pose.at(0.0, 0.0, yaw=3 * math.pi).yaw == approx(-math.pi)
    assert Pose.at(0.0, 0.0, yaw=-0.5).yaw == -0.5
    assert Pose.at(1.0, 2.0).position == Vec3(1.0, 2.0, 0.0)
    assert Pose.at(1.0, 2.0).yaw == 0.0


def test_pose_rejects_non_finite_yaw():
    with pytest.raises(ValueError):
        Pose.at(0.0, 0.0, yaw=math.nan)
