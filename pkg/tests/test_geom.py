import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trajcritic.errors import InvalidInputError
from trajcritic.geom import (
    BicycleState,
    Obb,
    Pose2D,
    bicycle_rollout,
    bicycle_step,
    cross_track_error,
    heading_deviation,
    normalize_angle,
    point_in_polygon,
    point_to_polyline_distance,
    sat_intersects,
    signed_cross_track_errors,
)


def test_normalize_angle_range_and_values():
    assert normalize_angle(0.0) == 0.0
    assert normalize_angle(math.pi) == pytest.approx(math.pi)
    assert normalize_angle(-math.pi) == pytest.approx(math.pi)  # (-pi, pi]
    assert normalize_angle(3 * math.pi) == pytest.approx(math.pi)
    assert normalize_angle(2 * math.pi + 0.1) == pytest.approx(0.1)
    assert normalize_angle(-0.1) == pytest.approx(-0.1)


@given(st.floats(-100.0, 100.0))
def test_normalize_angle_idempotent(a):
    n = normalize_angle(a)
    assert -math.pi < n <= math.pi
    assert normalize_angle(n) == pytest.approx(n)


def test_pose_yaw_normalized():
    p = Pose2D(0.0, 0.0, 3 * math.pi)
    assert p.yaw == pytest.approx(math.pi)


def test_obb_corners_axis_aligned():
    box = Obb(Pose2D(1.0, 2.0, 0.0), 2.0, 1.0)
    expected = {(3.0, 3.0), (-1.0, 3.0), (-1.0, 1.0), (3.0, 1.0)}
    got = {(round(x, 9), round(y, 9)) for x, y in box.corners()}
    assert got == expected


def test_obb_corners_rotated_oracle():
    # 90 degrees: length axis becomes +y
    box = Obb(Pose2D(0.0, 0.0, math.pi / 2), 2.0, 1.0)
    expected = {(-1.0, 2.0), (-1.0, -2.0), (1.0, 2.0), (1.0, -2.0)}
    got = {(round(x, 9), round(y, 9)) for x, y in box.corners()}
    assert got == expected


def test_obb_validation():
    with pytest.raises(InvalidInputError):
        Obb(Pose2D(0, 0, 0), 0.0, 1.0)
    with pytest.raises(InvalidInputError):
        Obb(Pose2D(0, 0, 0), 1.0, 1.0, z_interval=(2.0, 1.0))


def test_sat_disjoint_and_overlapping():
    a = Obb(Pose2D(0, 0, 0), 1.0, 1.0)
    assert sat_intersects(a, Obb(Pose2D(5, 0, 0), 1.0, 1.0)) is False
    assert sat_intersects(a, Obb(Pose2D(1.5, 0, 0), 1.0, 1.0)) is True
    # Rotated near-miss that an AABB test would call overlapping
    b = Obb(Pose2D(2.6, 2.6, math.pi / 4), 2.0, 0.5)
    assert sat_intersects(a, b) is False


def test_sat_touching_counts_as_intersecting():
    a = Obb(Pose2D(0, 0, 0), 1.0, 1.0)
    b = Obb(Pose2D(2.0, 0, 0), 1.0, 1.0)  # faces exactly touch at x=1
    assert sat_intersects(a, b) is True


def test_sat_z_interval_separation():
    a = Obb(Pose2D(0, 0, 0), 1.0, 1.0, z_interval=(0.0, 1.0))
    b = Obb(Pose2D(0, 0, 0), 1.0, 1.0, z_interval=(1.5, 2.0))
    assert sat_intersects(a, b) is False
    c = Obb(Pose2D(0, 0, 0), 1.0, 1.0, z_interval=(1.0, 2.0))  # touching in z
    assert sat_intersects(a, c) is True


obb_strategy = st.builds(
    lambda x, y, yaw, hl, hw: Obb(Pose2D(x, y, yaw), hl, hw),
    st.floats(-5, 5), st.floats(-5, 5), st.floats(-math.pi, math.pi),
    st.floats(0.2, 2.5), st.floats(0.2, 2.5),
)


@given(obb_strategy, obb_strategy)
@settings(max_examples=200, deadline=None)
def test_sat_symmetric(a, b):
    assert sat_intersects(a, b) == sat_intersects(b, a)


@given(obb_strategy, obb_strategy,
       st.floats(-10, 10), st.floats(-10, 10), st.floats(-math.pi, math.pi))
@settings(max_examples=200, deadline=None)
def test_sat_rigid_motion_equivariant(a, b, tx, ty, rot):
    def moved(o):
        c, s = math.cos(rot), math.sin(rot)
        x = c * o.center.x - s * o.center.y + tx
        y = s * o.center.x + c * o.center.y + ty
        return Obb(Pose2D(x, y, o.center.yaw + rot), o.half_length, o.half_width,
                   o.z_interval)
    assert sat_intersects(a, b) == sat_intersects(moved(a), moved(b))


def test_bicycle_straight_line():
    s = BicycleState(Pose2D(0, 0, 0), 10.0)
    s = bicycle_step(s, 0.0, 0.0, 1.0)
    assert s.pose.x == pytest.approx(10.0)
    assert s.pose.y == pytest.approx(0.0)
    assert s.pose.yaw == 0.0


def test_bicycle_circular_arc_closed_form():
    # Constant steer at constant speed traces a circle of radius L/tan(delta).
    L, delta, v, dt = 2.9, 0.3, 5.0, 0.001
    radius = L / math.tan(delta)
    state = BicycleState(Pose2D(0, 0, 0), v, L)
    n = 2000
    poses = bicycle_rollout(state, [(delta, 0.0, dt)] * n)
    theta = v * n * dt / radius  # turned angle
    # Forward-Euler discretization: position error is O(v*dt) per turn
    expected = np.array([radius * math.sin(theta), radius * (1 - math.cos(theta))])
    assert np.linalg.norm(poses[-1].position - expected) < 0.02
    assert poses[-1].yaw == pytest.approx(theta, abs=1e-9)


def test_bicycle_speed_clamped_at_zero():
    s = BicycleState(Pose2D(0, 0, 0), 1.0)
    s = bicycle_step(s, 0.0, -10.0, 1.0)
    assert s.speed == 0.0


def test_bicycle_validation():
    s = BicycleState(Pose2D(0, 0, 0), 1.0)
    with pytest.raises(InvalidInputError):
        bicycle_step(s, 0.0, 0.0, 0.0)
    with pytest.raises(InvalidInputError):
        bicycle_step(s, math.pi / 2, 0.0, 0.1)
    with pytest.raises(InvalidInputError):
        BicycleState(Pose2D(0, 0, 0), -1.0)


def test_point_to_polyline_distance_oracle():
    poly = np.array([[0.0, 0.0], [10.0, 0.0]])
    assert point_to_polyline_distance([5.0, 3.0], poly) == pytest.approx(3.0)
    assert point_to_polyline_distance([-4.0, 3.0], poly) == pytest.approx(5.0)
    assert point_to_polyline_distance([12.0, 0.0], poly) == pytest.approx(2.0)


def test_cross_track_error_is_max_over_pred():
    ref = np.array([[0.0, 0.0], [10.0, 0.0]])
    pred = np.array([[0.0, 0.5], [5.0, 2.0], [10.0, 1.0]])
    assert cross_track_error(pred, ref) == pytest.approx(2.0)


def test_signed_cte_left_positive():
    ref = np.array([[0.0, 0.0], [10.0, 0.0]])
    signed = signed_cross_track_errors(np.array([[5.0, 1.5], [5.0, -2.5]]), ref)
    assert signed[0] == pytest.approx(1.5)
    assert signed[1] == pytest.approx(-2.5)


def test_heading_deviation_pure_rotation_exact():
    n = 10
    ref = np.column_stack([np.arange(n, dtype=float) + 1, np.zeros(n)])
    ang = math.radians(7.5)
    c, s = math.cos(ang), math.sin(ang)
    pred = ref @ np.array([[c, s], [-s, c]]).T
    dev = heading_deviation(pred, ref, Pose2D(0, 0, 0))
    assert dev == pytest.approx(7.5, abs=1e-9)


def test_point_in_polygon_square():
    sq = np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]])
    assert point_in_polygon([1.0, 1.0], sq) is True
    assert point_in_polygon([3.0, 1.0], sq) is False
    assert point_in_polygon([2.0, 1.0], sq) is True  # boundary
    assert point_in_polygon([0.0, 0.0], sq) is True  # vertex
