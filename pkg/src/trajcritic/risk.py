"""Four-domain risk analysis of a planned trajectory against the expert
reference and scene context.

Analyzers cover lateral geometry, longitudinal kinematics, collision
verification (bicycle-model rollout + SAT), and environmental context. Their
results aggregate into a six-flag report: Collision, Speed, Direction,
Pedestrian, Stop Sign, Traffic Light. Flags are independent (multi-label) and
each true flag carries quantitative evidence sufficient to re-derive it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .geom import (
    BicycleState,
    Obb,
    Pose2D,
    bicycle_step,
    heading_deviation,
    normalize_angle,
    point_in_polygon,
    signed_cross_track_errors,
    sat_intersects,
)
from .traj import Trajectory, speed_profile

FLAG_NAMES = ("collision", "speed", "direction", "pedestrian", "stop_sign", "traffic_light")

EGO_Z_INTERVAL = (0.0, 1.6)
DEFAULT_ACTOR_Z = (0.0, 1.8)


@dataclass(frozen=True)
class RiskThresholds:
    tau_theta: float = 7.5          # deg, angular deviation
    tau_lat: float = 2.0            # m, max cross-track error
    speed_limit_margin: float = 0.9  # fraction of the legal limit
    tau_rel: float = 0.20           # relative speed error
    tau_abs: float = 0.5            # m/s, absolute speed error
    complex_actor_count: int = 6
    vru_radius: float = 10.0        # m, pedestrian proximity
    wetness_threshold: float = 0.40
    # Extension block: intent and topology classification (implementation choices)
    intent_accel: float = 0.2       # m/s^2, accelerate/decelerate deadband
    intent_stop_speed: float = 0.5  # m/s, braking-to-stop terminal speed
    turn_heading_deg: float = 30.0  # cumulative heading change for a turn
    lane_change_lateral: float = 2.5  # m, net lateral displacement for a lane change

    def __post_init__(self):
        for name in ("tau_theta", "tau_lat", "tau_rel", "tau_abs", "vru_radius"):
            if getattr(self, name) <= 0:
                raise InvalidInputError(f"{name} must be positive")
        for name in ("tau_rel", "speed_limit_margin", "wetness_threshold"):
            if not 0 < getattr(self, name) < 1:
                raise InvalidInputError(f"{name} must be in (0, 1)")
        if self.complex_actor_count <= 0:
            raise InvalidInputError("complex_actor_count must be positive")


@dataclass(frozen=True)
class Actor:
    actor_id: str
    cls: str  # vehicle | pedestrian | static
    half_length: float
    half_width: float
    forecast: np.ndarray  # (K, 3) poses (x, y, yaw) on the speed-waypoint dt grid
    dt: float = 0.25
    z_interval: tuple = DEFAULT_ACTOR_Z

    def __post_init__(self):
        fc = np.asarray(self.forecast, dtype=float)
        if fc.ndim != 2 or fc.shape[1] != 3:
            raise InvalidInputError("actor forecast must be (K, 3) poses")
        object.__setattr__(self, "forecast", fc)

    def obb_at(self, step: int) -> Obb:
        i = min(step, len(self.forecast) - 1)
        x, y, yaw = self.forecast[i]
        return Obb(Pose2D(x, y, yaw), self.half_length, self.half_width, self.z_interval)


@dataclass(frozen=True)
class Environment:
    wetness: float = 0.0
    visibility: str = "clear"  # clear | rain | fog | night


@dataclass(frozen=True)
class SceneContext:
    ego: BicycleState
    actors: tuple = ()
    speed_limit: float = 13.9
    traffic_light: str = "none"  # none | red | yellow | green
    stop_sign_active: bool = False
    environment: Environment = Environment()
    expert: Trajectory | None = None
    forbidden_zones: tuple = ()  # polygons as (N, 2) arrays
    ego_half_length: float = 2.3
    ego_half_width: float = 0.95
    lane_offsets: tuple = (-3.5, 3.5)  # lateral offsets of adjacent zones
    scene_id: str = "scene"

    def __post_init__(self):
        if self.speed_limit <= 0:
            raise InvalidInputError("speed_limit must be positive")

    def ego_obb(self, pose: Pose2D) -> Obb:
        return Obb(pose, self.ego_half_length, self.ego_half_width, EGO_Z_INTERVAL)


@dataclass(frozen=True)
class RiskReport:
    collision: bool
    speed: bool
    direction: bool
    pedestrian: bool
    stop_sign: bool
    traffic_light: bool
    evidence: dict = field(default_factory=dict)

    def flags(self) -> dict:
        return {name: getattr(self, name) for name in FLAG_NAMES}

    def n_risks(self) -> int:
        return sum(self.flags().values())


# ---------------------------------------------------------------------------
# Lateral

def route_topology(points: np.ndarray, th: RiskThresholds) -> str:
    """Classify route geometry from cumulative heading change and net lateral
    displacement: left_turn / right_turn / lane_change / straight."""
    seg = np.diff(np.asarray(points, dtype=float), axis=0)
    headings = np.arctan2(seg[:, 1], seg[:, 0])
    turns = np.array([normalize_angle(d) for d in np.diff(headings)])
    cum = math.degrees(float(np.sum(turns)))
    if abs(cum) > th.turn_heading_deg:
        return "left_turn" if cum > 0 else "right_turn"
    h0 = headings[0]
    disp = points[-1] - points[0]
    lateral = -math.sin(h0) * disp[0] + math.cos(h0) * disp[1]
    if abs(lateral) > th.lane_change_lateral:
        return "lane_change"
    return "straight"


def analyze_lateral(pred: Trajectory, ctx: SceneContext, th: RiskThresholds):
    """Direction risk: angular deviation, route offset (CTE), or topology mismatch."""
    expert = ctx.expert
    if expert is None:
        raise InvalidInputError("scene context lacks an expert reference")
    origin = ctx.ego.pose
    delta_theta = heading_deviation(pred.route.points, expert.route.points, origin)
    signed = signed_cross_track_errors(pred.route.points, expert.route.points)
    i_max = int(np.argmax(np.abs(signed)))
    max_cte = float(np.abs(signed[i_max]))
    offset_side = "Left" if signed[i_max] >= 0 else "Right"
    topo_pred = route_topology(pred.route.points, th)
    topo_expert = route_topology(expert.route.points, th)
    flag = (delta_theta > th.tau_theta) or (max_cte > th.tau_lat) or (topo_pred != topo_expert)
    evidence = {
        "delta_theta_deg": delta_theta,
        "max_cte": max_cte,
        "offset_side": offset_side,
        "topology_pred": topo_pred,
        "topology_expert": topo_expert,
    }
    return flag, evidence


# ---------------------------------------------------------------------------
# Longitudinal

@dataclass(frozen=True)
class MotionIntent:
    label: str  # Accelerating | Decelerating | Maintaining | BrakingToStop


def classify_intent(w, th: RiskThresholds = RiskThresholds()) -> MotionIntent:
    """Classify the velocity trend from the time-weighted mean acceleration."""
    if len(w) < 4:
        raise InvalidInputError("need at least 4 speed waypoints")
    v = speed_profile(w)
    a = np.diff(v) / w.dt
    t = np.arange(1, len(a) + 1, dtype=float)
    abar = float(np.sum(t * a) / np.sum(t))
    if v[-1] < th.intent_stop_speed and abar < 0:
        return MotionIntent("BrakingToStop")
    if abar > th.intent_accel:
        return MotionIntent("Accelerating")
    if abar < -th.intent_accel:
        return MotionIntent("Decelerating")
    return MotionIntent("Maintaining")


def _rel_abs(v_pred: float, v_gt: float):
    abs_err = abs(v_pred - v_gt)
    rel_err = abs_err / v_gt if v_gt > 1e-9 else (math.inf if abs_err > 1e-9 else 0.0)
    return rel_err, abs_err


def analyze_longitudinal(pred: Trajectory, ctx: SceneContext, th: RiskThresholds):
    """Speed risk: limit violation, speed deviation (rel AND abs), or intent mismatch."""
    expert = ctx.expert
    if expert is None:
        raise InvalidInputError("scene context lacks an expert reference")
    if len(pred.speed) < 4 or len(expert.speed) < 4:
        raise InvalidInputError("need at least 4 speed waypoints")
    v_pred = speed_profile(pred.speed)
    v_gt = speed_profile(expert.speed)
    v_curr = float(v_pred[0])
    limit_violation = v_curr > th.speed_limit_margin * ctx.speed_limit

    early_rel, early_abs = _rel_abs(float(np.mean(v_pred[:3])), float(np.mean(v_gt[:3])))
    final_rel, final_abs = _rel_abs(float(v_pred[-1]), float(v_gt[-1]))
    deviation = (early_rel > th.tau_rel and early_abs > th.tau_abs) or \
                (final_rel > th.tau_rel and final_abs > th.tau_abs)

    intent_pred = classify_intent(pred.speed, th)
    intent_gt = classify_intent(expert.speed, th)
    intent_mismatch = intent_pred.label != intent_gt.label

    flag = limit_violation or deviation or intent_mismatch
    evidence = {
        "v_curr": v_curr,
        "speed_limit": float(ctx.speed_limit),
        "early_rel_err": early_rel,
        "early_abs_err": early_abs,
        "final_rel_err": final_rel,
        "final_abs_err": final_abs,
        "v_pred_final": float(v_pred[-1]),
        "v_gt_final": float(v_gt[-1]),
        "intent_pred": intent_pred.label,
        "intent_gt": intent_gt.label,
    }
    return flag, evidence


# ---------------------------------------------------------------------------
# Collision

MAX_STEER = 0.6  # rad, physical steering limit for forecast rollouts
PURSUIT_LOOKAHEAD = 3.0  # m


def pure_pursuit_steer(pose: Pose2D, route: np.ndarray, wheelbase: float,
                       lookahead: float = PURSUIT_LOOKAHEAD) -> float:
    """Steering angle (CCW-positive) toward a lookahead point on the route."""
    pts = np.asarray(route, dtype=float)
    d = np.linalg.norm(pts - pose.position, axis=1)
    i_near = int(np.argmin(d))
    # Walk forward along the polyline until the lookahead arc is consumed
    remaining = lookahead
    target = pts[-1]
    for i in range(i_near, len(pts) - 1):
        seg = np.linalg.norm(pts[i + 1] - pts[i])
        if remaining <= seg:
            target = pts[i] + (pts[i + 1] - pts[i]) * (remaining / seg if seg > 0 else 0.0)
            break
        remaining -= seg
    to_target = target - pose.position
    dist = float(np.linalg.norm(to_target))
    if dist < 1e-9:
        return 0.0
    alpha = normalize_angle(math.atan2(to_target[1], to_target[0]) - pose.yaw)
    delta = math.atan2(2.0 * wheelbase * math.sin(alpha), max(dist, 1e-6))
    return float(np.clip(delta, -MAX_STEER, MAX_STEER))


def rollout_trajectory(pred: Trajectory, ego: BicycleState, lookahead: float = PURSUIT_LOOKAHEAD):
    """Forecast ego poses along the planned trajectory, one per speed-dt step.

    Steering comes from pure pursuit on the predicted route; speed is taken
    directly from the implied speed profile.
    """
    profile = speed_profile(pred.speed)
    dt = pred.speed.dt
    state = ego
    poses = []
    for v in profile:
        state = BicycleState(state.pose, float(v), state.wheelbase)
        # Lookahead never shorter than one step's travel, or fast rollouts
        # overshoot the pursuit target and oscillate.
        la = max(lookahead, float(v) * dt)
        steer = pure_pursuit_steer(state.pose, pred.route.points, state.wheelbase, la)
        state = bicycle_step(state, steer, 0.0, dt)
        poses.append(state.pose)
    return poses


def check_collisions(pred: Trajectory, ctx: SceneContext):
    """Collision risk: SAT overlap between the forecast ego box and any actor
    box at any step of the rollout horizon."""
    profile = speed_profile(pred.speed)
    n_steps = len(profile)
    for actor in ctx.actors:
        if len(actor.forecast) < n_steps + 1:
            raise InvalidInputError(
                f"actor {actor.actor_id} forecast shorter than the prediction horizon")
    ego_poses = rollout_trajectory(pred, ctx.ego)
    first = None
    for i, pose in enumerate(ego_poses):
        ego_box = ctx.ego_obb(pose)
        for actor in ctx.actors:
            if sat_intersects(ego_box, actor.obb_at(i + 1)):
                first = {
                    "actor_id": actor.actor_id,
                    "actor_class": actor.cls,
                    "timestep": i + 1,
                    "time": (i + 1) * pred.speed.dt,
                }
                break
        if first is not None:
            break
    evidence = {"first_collision": first, "horizon_steps": n_steps}
    return first is not None, evidence


# ---------------------------------------------------------------------------
# Environmental / contextual

DYNAMIC_CLASSES = ("vehicle", "pedestrian")
ADVERSE_VISIBILITY = ("rain", "fog", "night")


def analyze_context(ctx: SceneContext, pred: Trajectory, th: RiskThresholds):
    """Pedestrian proximity, traffic controls, and scene-complexity flags."""
    ego_pos = ctx.ego.pose.position
    ped_dists = [float(np.linalg.norm(a.forecast[0][:2] - ego_pos))
                 for a in ctx.actors if a.cls == "pedestrian"]
    min_ped = min(ped_dists) if ped_dists else math.inf
    pedestrian = min_ped < th.vru_radius

    stop_sign = bool(ctx.stop_sign_active)
    traffic_light = ctx.traffic_light == "red"

    n_dynamic = sum(1 for a in ctx.actors if a.cls in DYNAMIC_CLASSES)
    forbidden_entry = any(
        point_in_polygon(p, zone)
        for zone in ctx.forbidden_zones for p in pred.route.points
    )
    complexity = {
        "dynamic_actor_count": n_dynamic,
        "crowded": n_dynamic > th.complex_actor_count,
        "adverse_visibility": ctx.environment.visibility in ADVERSE_VISIBILITY,
        "visibility": ctx.environment.visibility,
        "wetness": float(ctx.environment.wetness),
        "wet_road": ctx.environment.wetness > th.wetness_threshold,
        "forbidden_zone_entry": forbidden_entry,
    }
    evidence = {
        "min_pedestrian_distance": min_ped,
        "stop_sign_active": stop_sign,
        "traffic_light_state": ctx.traffic_light,
        "complexity": complexity,
    }
    return pedestrian, stop_sign, traffic_light, evidence


# ---------------------------------------------------------------------------
# Aggregation

def aggregate(pred: Trajectory, ctx: SceneContext,
              th: RiskThresholds = RiskThresholds()) -> RiskReport:
    """Run all four analyzers and assemble the six-flag report."""
    try:
        direction, lat_ev = analyze_lateral(pred, ctx, th)
    except InvalidInputError as e:
        raise InvalidInputError(f"lateral analyzer: {e}") from e
    try:
        speed, lon_ev = analyze_longitudinal(pred, ctx, th)
    except InvalidInputError as e:
        raise InvalidInputError(f"longitudinal analyzer: {e}") from e
    try:
        collision, col_ev = check_collisions(pred, ctx)
    except InvalidInputError as e:
        raise InvalidInputError(f"collision analyzer: {e}") from e
    pedestrian, stop_sign, traffic_light, ctx_ev = analyze_context(ctx, pred, th)
    evidence = {
        "lateral": lat_ev,
        "longitudinal": lon_ev,
        "collision": col_ev,
        "context": ctx_ev,
    }
    return RiskReport(
        collision=collision,
        speed=speed,
        direction=direction,
        pedestrian=pedestrian,
        stop_sign=stop_sign,
        traffic_light=traffic_light,
        evidence=evidence,
    )


def rethreshold(evidence: dict, th: RiskThresholds) -> dict:
    """Recompute the six flags from stored evidence alone (evidence sufficiency)."""
    lat = evidence["lateral"]
    lon = evidence["longitudinal"]
    col = evidence["collision"]
    ctx = evidence["context"]
    direction = (lat["delta_theta_deg"] > th.tau_theta
                 or lat["max_cte"] > th.tau_lat
                 or lat["topology_pred"] != lat["topology_expert"])
    speed = (lon["v_curr"] > th.speed_limit_margin * lon["speed_limit"]
             or (lon["early_rel_err"] > th.tau_rel and lon["early_abs_err"] > th.tau_abs)
             or (lon["final_rel_err"] > th.tau_rel and lon["final_abs_err"] > th.tau_abs)
             or lon["intent_pred"] != lon["intent_gt"])
    return {
        "collision": col["first_collision"] is not None,
        "speed": speed,
        "direction": direction,
        "pedestrian": ctx["min_pedestrian_distance"] < th.vru_radius,
        "stop_sign": bool(ctx["stop_sign_active"]),
        "traffic_light": ctx["traffic_light_state"] == "red",
    }
