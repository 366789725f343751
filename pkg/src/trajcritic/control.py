"""Low-level tracking controllers: dual PID (lateral steering, longitudinal
throttle) plus brake logic.

Steering commands are right-positive in [-1, 1]; throttle in [0, 1]; brake is
binary and forces throttle to zero downstream. Gains default to the values
frozen in the shipped config; the lateral error term is the pure-pursuit
steering angle toward a lookahead point on the interpolated route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, TrackingLostError
from .geom import BicycleState, Pose2D, normalize_angle

MAX_STEER_ANGLE = 0.6  # rad, command of +/-1 maps to +/- this physical angle


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float = 0.0
    kd: float = 0.0
    integral_clamp: float = 10.0


DEFAULT_LATERAL_GAINS = PidGains(kp=0.9, ki=0.0, kd=0.2)
DEFAULT_LONGITUDINAL_GAINS = PidGains(kp=0.5, ki=0.05, kd=0.0, integral_clamp=2.0)
DEFAULT_LOOKAHEAD = 3.0


@dataclass(frozen=True)
class BrakeConfig:
    stop_threshold: float = 0.4  # m/s
    ratio_limit: float = 1.1


class Pid:
    """Textbook PID with clamped integral. One instance per control loop."""

    def __init__(self, gains: PidGains):
        self.gains = gains
        self.integral = 0.0
        self.prev_error = None

    def reset(self):
        self.integral = 0.0
        self.prev_error = None

    def step(self, error: float, dt: float) -> float:
        g = self.gains
        self.integral = float(np.clip(self.integral + error * dt,
                                      -g.integral_clamp, g.integral_clamp))
        deriv = 0.0 if self.prev_error is None else (error - self.prev_error) / dt
        self.prev_error = error
        return g.kp * error + g.ki * self.integral + g.kd * deriv


class LateralController:
    """Steering from the pure-pursuit angle toward a lookahead point on the route."""

    def __init__(self, gains: PidGains = DEFAULT_LATERAL_GAINS,
                 lookahead: float = DEFAULT_LOOKAHEAD):
        self.pid = Pid(gains)
        self.lookahead = lookahead

    def step(self, state: BicycleState, route: np.ndarray, dt: float) -> float:
        target = self._lookahead_point(state.pose, np.asarray(route, dtype=float))
        to_target = target - state.pose.position
        dist = float(np.linalg.norm(to_target))
        alpha = normalize_angle(math.atan2(to_target[1], to_target[0]) - state.pose.yaw)
        # Pure-pursuit steering angle (CCW-positive), re-signed to right-positive
        delta = math.atan2(2.0 * state.wheelbase * math.sin(alpha), max(dist, 1e-6))
        error = -delta / MAX_STEER_ANGLE
        return float(np.clip(self.pid.step(error, dt), -1.0, 1.0))

    def _lookahead_point(self, pose: Pose2D, pts: np.ndarray) -> np.ndarray:
        d = np.linalg.norm(pts - pose.position, axis=1)
        i_near = int(np.argmin(d))
        heading = pose.heading()
        if i_near == len(pts) - 1 and float(np.dot(pts[-1] - pose.position, heading)) < -1e-6:
            raise TrackingLostError("route lies entirely behind the vehicle")
        seg = np.linalg.norm(np.diff(pts[i_near:], axis=0), axis=1)
        cum = np.cumsum(seg)
        j = int(np.searchsorted(cum, self.lookahead))
        if j >= len(seg):
            return pts[-1]
        remaining = self.lookahead - (cum[j - 1] if j > 0 else 0.0)
        frac = remaining / seg[j] if seg[j] > 0 else 0.0
        return pts[i_near + j] + (pts[i_near + j + 1] - pts[i_near + j]) * frac


class LongitudinalController:
    """Throttle from a PID on the speed error."""

    def __init__(self, gains: PidGains = DEFAULT_LONGITUDINAL_GAINS):
        self.pid = Pid(gains)

    def step(self, current_speed: float, desired_speed: float, dt: float) -> float:
        return float(np.clip(self.pid.step(desired_speed - current_speed, dt), 0.0, 1.0))


def brake_logic(current_speed: float, desired_speed: float,
                cfg: BrakeConfig = BrakeConfig()) -> int:
    """Brake when the desired speed is below the stop threshold or the current
    speed exceeds the desired by more than the ratio limit."""
    if desired_speed < cfg.stop_threshold:
        return 1
    if desired_speed > 0 and current_speed / desired_speed > cfg.ratio_limit:
        return 1
    return 0


@dataclass(frozen=True)
class ControlCommand:
    steer: float
    throttle: float
    brake: int

    def __post_init__(self):
        if not -1.0 <= self.steer <= 1.0:
            raise InvalidInputError("steer out of range")
        if not 0.0 <= self.throttle <= 1.0:
            raise InvalidInputError("throttle out of range")
        if self.brake not in (0, 1):
            raise InvalidInputError("brake must be 0 or 1")
        if self.brake == 1 and self.throttle != 0.0:
            raise InvalidInputError("brake implies zero throttle")
