"""Planar geometry: oriented bounding boxes, SAT intersection, bicycle kinematics,
and path-deviation measures.

All poses are (x, y, yaw) with yaw counter-clockwise from +x, normalized to
(-pi, pi]. Boxes are gravity-aligned: a yawed 2D rectangle plus a vertical
[z_min, z_max] interval, so the intersection test is 4-axis 2D SAT plus a
z-interval overlap. Touching boundaries count as intersecting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


def normalize_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "yaw", normalize_angle(float(self.yaw)))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def heading(self) -> np.ndarray:
        return np.array([math.cos(self.yaw), math.sin(self.yaw)])


@dataclass(frozen=True)
class Obb:
    """Gravity-aligned oriented box: yawed rectangle + vertical extent."""

    center: Pose2D
    half_length: float
    half_width: float
    z_interval: tuple = (0.0, 1.8)

    def __post_init__(self):
        if self.half_length <= 0 or self.half_width <= 0:
            raise InvalidInputError("OBB half-extents must be positive")
        z0, z1 = self.z_interval
        if z0 > z1:
            raise InvalidInputError("z_interval must satisfy z_min <= z_max")

    def corners(self) -> np.ndarray:
        """The 4 rectangle corners, CCW, shape (4, 2)."""
        c, s = math.cos(self.center.yaw), math.sin(self.center.yaw)
        rot = np.array([[c, -s], [s, c]])
        local = np.array(
            [
                [self.half_length, self.half_width],
                [-self.half_length, self.half_width],
                [-self.half_length, -self.half_width],
                [self.half_length, -self.half_width],
            ]
        )
        return local @ rot.T + self.center.position

    def axes(self) -> np.ndarray:
        """The two face normals of the rectangle, shape (2, 2)."""
        c, s = math.cos(self.center.yaw), math.sin(self.center.yaw)
        return np.array([[c, s], [-s, c]])


def sat_intersects(a: Obb, b: Obb) -> bool:
    """True iff the two boxes overlap (touching counts as overlap).

    2D separating-axis test over the 4 candidate axes, plus z-interval overlap.
    """
    if a.z_interval[1] < b.z_interval[0] or b.z_interval[1] < a.z_interval[0]:
        return False
    ca, cb = a.corners(), b.corners()
    for axis in np.vstack([a.axes(), b.axes()]):
        pa = ca @ axis
        pb = cb @ axis
        if pa.max() < pb.min() or pb.max() < pa.min():
            return False
    return True


@dataclass(frozen=True)
class BicycleState:
    pose: Pose2D
    speed: float = 0.0
    wheelbase: float = 2.9

    def __post_init__(self):
        if self.speed < 0:
            raise InvalidInputError("speed must be nonnegative")
        if self.wheelbase <= 0:
            raise InvalidInputError("wheelbase must be positive")


def bicycle_step(state: BicycleState, steer: float, accel: float, dt: float) -> BicycleState:
    """One kinematic bicycle update. Position advances with the current speed,
    then speed is updated and clamped at zero."""
    if dt <= 0:
        raise InvalidInputError("dt must be positive")
    if abs(steer) >= math.pi / 2:
        raise InvalidInputError("|steer| must be < pi/2")
    p, v, L = state.pose, state.speed, state.wheelbase
    x = p.x + v * math.cos(p.yaw) * dt
    y = p.y + v * math.sin(p.yaw) * dt
    yaw = normalize_angle(p.yaw + v * math.tan(steer) / L * dt)
    v_next = max(0.0, v + accel * dt)
    return BicycleState(Pose2D(x, y, yaw), v_next, L)


def bicycle_rollout(state: BicycleState, controls) -> list:
    """Roll the bicycle model through (steer, accel, dt) controls.

    Returns one Pose2D per control step.
    """
    poses = []
    s = state
    for steer, accel, dt in controls:
        s = bicycle_step(s, steer, accel, dt)
        poses.append(s.pose)
    return poses


def _as_points(poly) -> np.ndarray:
    pts = np.asarray(poly, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidInputError("polyline must be an (N, 2) point array")
    return pts


def point_to_polyline_distance(point, poly) -> float:
    """Perpendicular distance from a point to the nearest segment of a polyline."""
    pts = _as_points(poly)
    p = np.asarray(point, dtype=float)
    seg_a = pts[:-1]
    seg_d = pts[1:] - seg_a
    seg_len2 = np.einsum("ij,ij->i", seg_d, seg_d)
    t = np.einsum("ij,ij->i", p - seg_a, seg_d) / np.where(seg_len2 > 0, seg_len2, 1.0)
    t = np.clip(t, 0.0, 1.0)
    closest = seg_a + t[:, None] * seg_d
    return float(np.min(np.linalg.norm(closest - p, axis=1)))


def cross_track_error(path_pred, path_ref) -> float:
    """Max over predicted points of the distance to the reference polyline."""
    pred = _as_points(path_pred)
    ref = _as_points(path_ref)
    if len(pred) < 2 or len(ref) < 2:
        raise InvalidInputError("polylines need at least 2 points")
    return max(point_to_polyline_distance(p, ref) for p in pred)


def signed_cross_track_errors(path_pred, path_ref) -> np.ndarray:
    """Signed distance of each predicted point to the reference polyline.

    Positive means the point lies left of the local reference direction.
    """
    pred = _as_points(path_pred)
    ref = _as_points(path_ref)
    seg_a = ref[:-1]
    seg_d = ref[1:] - seg_a
    seg_len2 = np.einsum("ij,ij->i", seg_d, seg_d)
    out = np.empty(len(pred))
    for k, p in enumerate(pred):
        t = np.einsum("ij,ij->i", p - seg_a, seg_d) / np.where(seg_len2 > 0, seg_len2, 1.0)
        t = np.clip(t, 0.0, 1.0)
        closest = seg_a + t[:, None] * seg_d
        dists = np.linalg.norm(closest - p, axis=1)
        i = int(np.argmin(dists))
        tangent = seg_d[i]
        off = p - closest[i]
        sign = 1.0 if tangent[0] * off[1] - tangent[1] * off[0] >= 0 else -1.0
        out[k] = sign * dists[i]
    return out


def heading_deviation(pred, ref, origin: Pose2D) -> float:
    """Unsigned angle (degrees) between the two route heading vectors.

    Each heading vector is the mean of the final 5 waypoints minus the origin
    position.
    """
    pred = _as_points(pred)
    ref = _as_points(ref)
    if len(pred) < 5 or len(ref) < 5:
        raise InvalidInputError("routes need at least 5 points")
    o = origin.position
    v1 = pred[-5:].mean(axis=0) - o
    v2 = ref[-5:].mean(axis=0) - o
    n1, n2 = np.linalg.norm(v1), np.linalg.norm(v2)
    if n1 < 1e-12 or n2 < 1e-12:
        raise InvalidInputError("degenerate (zero-length) heading vector")
    cosang = float(np.clip(np.dot(v1, v2) / (n1 * n2), -1.0, 1.0))
    return math.degrees(math.acos(cosang))


def point_in_polygon(point, polygon) -> bool:
    """Ray-casting point-in-polygon test (boundary counts as inside)."""
    poly = _as_points(polygon)
    x, y = float(point[0]), float(point[1])
    n = len(poly)
    inside = False
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        # On-segment check: treat boundary as inside
        d = abs((x2 - x1) * (y - y1) - (y2 - y1) * (x - x1))
        if d < 1e-12 and min(x1, x2) - 1e-12 <= x <= max(x1, x2) + 1e-12 \
                and min(y1, y2) - 1e-12 <= y <= max(y1, y2) + 1e-12:
            return True
        if (y1 > y) != (y2 > y):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xint:
                inside = not inside
    return inside
