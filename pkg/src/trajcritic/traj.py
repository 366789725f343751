"""Dual waypoint trajectory representation.

A trajectory pairs a spatial route (points at a nominal 1 m pitch, steering
reference) with temporal speed waypoints (points at a fixed dt, default 0.25 s,
whose consecutive distances encode the velocity profile). Canonical sizes are
20 route points and 10 speed points, but any length >= 2 is accepted outside
dataset emission.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import InvalidInputError, OutOfRangeError

ROUTE_POINTS = 20
SPEED_POINTS = 10
SPEED_DT = 0.25


def _points(pts, min_len=2) -> np.ndarray:
    arr = np.asarray(pts, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidInputError("waypoints must be an (N, 2) array")
    if len(arr) < min_len:
        raise InvalidInputError(f"need at least {min_len} waypoints, got {len(arr)}")
    return arr


@dataclass(frozen=True)
class RouteWaypoints:
    points: np.ndarray

    def __post_init__(self):
        pts = _points(self.points)
        if np.any(np.all(np.diff(pts, axis=0) == 0.0, axis=1)):
            raise InvalidInputError("consecutive route points must be distinct")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def arc_lengths(self) -> np.ndarray:
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(seg)])


@dataclass(frozen=True)
class SpeedWaypoints:
    points: np.ndarray
    dt: float = SPEED_DT

    def __post_init__(self):
        object.__setattr__(self, "points", _points(self.points))
        if self.dt <= 0:
            raise InvalidInputError("dt must be positive")

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class Trajectory:
    route: RouteWaypoints
    speed: SpeedWaypoints


def speed_profile(w: SpeedWaypoints) -> np.ndarray:
    """Implied speeds: consecutive Euclidean distances divided by dt (length N-1)."""
    if len(w) < 2:
        raise InvalidInputError("need at least 2 speed waypoints")
    return np.linalg.norm(np.diff(w.points, axis=0), axis=1) / w.dt


def traj_distance(a: Trajectory, b: Trajectory,
                  route_weight: float = 1.0, speed_weight: float = 1.0) -> float:
    """Euclidean norm over the concatenated route and speed coordinates.

    Weights rescale the squared contributions of each block; defaults give the
    plain concatenated norm.
    """
    if len(a.route) != len(b.route) or len(a.speed) != len(b.speed):
        raise InvalidInputError("trajectories must have matching lengths")
    dr = a.route.points - b.route.points
    ds = a.speed.points - b.speed.points
    return float(np.sqrt(route_weight * np.sum(dr * dr) + speed_weight * np.sum(ds * ds)))


def trajectories_equal(a: Trajectory, b: Trajectory, tol: float = 0.0) -> bool:
    if len(a.route) != len(b.route) or len(a.speed) != len(b.speed):
        return False
    if a.speed.dt != b.speed.dt:
        return False
    return traj_distance(a, b) <= tol


class PchipPath:
    """Arc-length parameterized monotone cubic interpolant of a polyline.

    Exact at the knots; the Fritsch-Carlson slope limiting guarantees each
    coordinate never overshoots between data points.
    """

    def __init__(self, points):
        pts = _points(points)
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(seg == 0.0):
            raise InvalidInputError("consecutive points must be distinct")
        s = np.concatenate([[0.0], np.cumsum(seg)])
        self.total_length = float(s[-1])
        self.knots = s
        self._fx = PchipInterpolator(s, pts[:, 0])
        self._fy = PchipInterpolator(s, pts[:, 1])

    def __call__(self, queries) -> np.ndarray:
        q = np.atleast_1d(np.asarray(queries, dtype=float))
        if np.any(q < -1e-9) or np.any(q > self.total_length + 1e-9):
            raise OutOfRangeError("query outside [0, total arc length]")
        q = np.clip(q, 0.0, self.total_length)
        return np.column_stack([self._fx(q), self._fy(q)])

    def tangent(self, query: float) -> np.ndarray:
        q = float(np.clip(query, 0.0, self.total_length))
        t = np.array([float(self._fx(q, 1)), float(self._fy(q, 1))])
        n = np.linalg.norm(t)
        return t / n if n > 1e-12 else np.array([1.0, 0.0])


def pchip_resample(points, queries) -> np.ndarray:
    """Resample a polyline at the given arc-length positions (monotone cubic)."""
    return PchipPath(points)(queries)
