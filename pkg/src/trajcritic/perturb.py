"""Perturbation synthesis: corrupt expert trajectories into plausible but risky
ones (speed scaling, forced lane deviation, forced collision), with batch
generation at configurable kind ratios.

Every emitted sample is dynamically verified with a kinematic bicycle rollout
(tracking error and lateral-acceleration limits); infeasible draws are
resampled and, after repeated failure, skipped with a logged reason.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError, InvalidInputError
from .geom import BicycleState, Pose2D, bicycle_step, normalize_angle, sat_intersects
from .risk import SceneContext, aggregate, pure_pursuit_steer, rollout_trajectory
from .traj import PchipPath, RouteWaypoints, SpeedWaypoints, Trajectory, speed_profile

log = logging.getLogger(__name__)

KINDS = ("increase_speed", "reduce_speed", "lane_change", "forced_collision")

# Default kind mix for batch synthesis
DEFAULT_MIX = {
    "increase_speed": 0.3688,
    "reduce_speed": 0.3718,
    "lane_change": 0.0946,
    "forced_collision": 0.1648,
}

GAMMA_AGGRESSIVE = (1.1, 1.5)
GAMMA_CAUTIOUS = (0.3, 0.9)
V_MAX_CRASH = 30.0  # m/s, reachability cap for forced collisions

TRACKING_ERROR_LIMIT = 0.5  # m, dynamic feasibility
LATERAL_ACCEL_LIMIT = 8.0   # m/s^2
TRACK_LOOKAHEAD = 2.0       # m, bicycle tracking of shifted routes
MAX_ATTEMPTS = 20


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str
    params: dict = field(default_factory=dict)
    rng_seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown perturbation kind {self.kind!r}")


# ---------------------------------------------------------------------------
# Speed scaling

def scale_speed(t: Trajectory, gamma: float) -> Trajectory:
    """Multiply every implied speed by gamma; the route is untouched."""
    if gamma <= 0:
        raise InvalidInputError("gamma must be positive")
    pts = t.speed.points
    disp = np.diff(pts, axis=0) * gamma
    new_pts = np.vstack([pts[0], pts[0] + np.cumsum(disp, axis=0)])
    return Trajectory(t.route, SpeedWaypoints(new_pts, t.speed.dt))


# ---------------------------------------------------------------------------
# Lane deviation

def shift_route(points: np.ndarray, w: float, k_start: int, l_trans: int) -> np.ndarray:
    """Analytic lateral shift: a linear 0 -> 1 ramp over the transition window,
    then the full offset along the local left normal."""
    pts = np.asarray(points, dtype=float)
    if k_start + l_trans > len(pts):
        raise InvalidInputError("transition window exceeds the route length")
    if l_trans < 1:
        raise InvalidInputError("l_trans must be >= 1")
    # Local tangents (central differences at interior points)
    tangents = np.gradient(pts, axis=0)
    norms = np.linalg.norm(tangents, axis=1, keepdims=True)
    tangents = tangents / np.where(norms > 1e-12, norms, 1.0)
    normals = np.column_stack([-tangents[:, 1], tangents[:, 0]])  # left-positive
    alpha = np.zeros(len(pts))
    idx = np.arange(k_start, k_start + l_trans)
    alpha[idx] = (idx - k_start + 1) / l_trans
    alpha[k_start + l_trans:] = 1.0
    return pts + (alpha * w)[:, None] * normals


def track_route(points: np.ndarray, wheelbase: float = 2.9, speed: float = 3.0,
                dt: float = 0.02, lookahead: float = TRACK_LOOKAHEAD) -> np.ndarray:
    """Follow a route with a pure-pursuit bicycle and resample the traced path
    at the route's own arc-length stations (dynamic feasibility projection)."""
    pts = np.asarray(points, dtype=float)
    seg0 = pts[1] - pts[0]
    yaw0 = math.atan2(seg0[1], seg0[0])
    state = BicycleState(Pose2D(pts[0][0], pts[0][1], yaw0), speed, wheelbase)
    total = float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
    trace = [pts[0].copy()]
    max_steps = int(2 * (total / (speed * dt)) + 200)
    for _ in range(max_steps):
        steer = pure_pursuit_steer(state.pose, pts, wheelbase, lookahead)
        state = bicycle_step(state, steer, 0.0, dt)
        trace.append(state.pose.position)
        if np.linalg.norm(state.pose.position - pts[-1]) < speed * dt:
            break
    trace = np.asarray(trace)
    trace_arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(trace, axis=0), axis=1))])
    route_arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    x = np.interp(route_arc, trace_arc, trace[:, 0])
    y = np.interp(route_arc, trace_arc, trace[:, 1])
    return np.column_stack([x, y])


def lane_deviation(t: Trajectory, w: float, k_start: int, l_trans: int) -> Trajectory:
    """Shift the route laterally by w across a transition window and track the
    result with the bicycle model for a dynamically feasible final route."""
    if w == 0.0:
        return t
    shifted = shift_route(t.route.points, w, k_start, l_trans)
    tracked = track_route(shifted)
    return Trajectory(RouteWaypoints(tracked), t.speed)


# ---------------------------------------------------------------------------
# Forced collision

def default_delta_safety(ctx: SceneContext) -> float:
    # Strictly less than the ego half-length: the collision point then falls
    # inside the ego box at t_crash with margin left for tracking wiggle in
    # the verification rollout.
    return 0.5 * ctx.ego_half_length


def forced_collision(t: Trajectory, ctx: SceneContext, target: str, t_crash: float,
                     delta_safety: float | None = None,
                     v_max: float = V_MAX_CRASH) -> Trajectory:
    """Reroute through the target's future position at a constant collision
    speed v_crash = (dist - delta_safety) / t_crash, verified by rollout+SAT."""
    if t_crash <= 0:
        raise InvalidInputError("t_crash must be positive")
    actor = next((a for a in ctx.actors if a.actor_id == target), None)
    if actor is None:
        raise InvalidInputError(f"unknown target actor {target!r}")
    dt = t.speed.dt
    step = int(round(t_crash / dt))
    horizon = (len(t.speed) - 1) * dt
    if step >= len(actor.forecast) or t_crash > horizon + 1e-9:
        raise InvalidInputError("t_crash outside the forecast or prediction horizon")
    if delta_safety is None:
        delta_safety = default_delta_safety(ctx)

    p_ego = ctx.ego.pose.position
    p_obj = actor.forecast[step][:2]
    dist = float(np.linalg.norm(p_ego - p_obj))
    v_crash = (dist - delta_safety) / t_crash
    if v_crash <= 1e-9:
        raise InfeasibleError("target already within the safety envelope")
    if v_crash > v_max:
        raise InfeasibleError(f"required collision speed {v_crash:.1f} m/s exceeds v_max")

    route = _collision_route(p_ego, p_obj, t.route.points, n_points=len(t.route))
    path = PchipPath(route)
    arcs = np.minimum(np.arange(len(t.speed)) * v_crash * dt, path.total_length)
    speed_pts = path(arcs)
    rough = Trajectory(RouteWaypoints(route), SpeedWaypoints(speed_pts, dt))

    if not _verify_overlap(rough, ctx, actor, step):
        raise InfeasibleError("rollout produced no overlap near t_crash")
    return rough


def _collision_route(p_ego, p_obj, original: np.ndarray, n_points: int) -> np.ndarray:
    """Straight segment through the collision point, rejoining the original
    route beyond it, resampled at 1 m pitch."""
    to_obj = p_obj - p_ego
    d = float(np.linalg.norm(to_obj))
    u = to_obj / max(d, 1e-9)
    # Continue a few meters past the target before rejoining
    past = p_obj + u * 3.0
    arcs = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(original, axis=0), axis=1))])
    proj = np.dot(original - p_ego, u)
    rejoin = original[proj > d + 5.0]
    raw = [p_ego, p_obj, past]
    prev = past
    for p in rejoin:
        if np.linalg.norm(p - prev) > 0.5:
            raw.append(p)
            prev = p
    raw = np.asarray(raw)
    path = PchipPath(raw)
    # Pitch widens beyond the nominal 1 m when the target is farther than the
    # canonical route length, so the collision point is always on the route.
    pitch = max(1.0, (d + 6.0) / (n_points - 1))
    stations = np.minimum(np.arange(n_points, dtype=float) * pitch, path.total_length)
    pts = path(stations)
    # Resampling can collapse points at the path end; nudge duplicates forward
    for i in range(1, len(pts)):
        if np.allclose(pts[i], pts[i - 1]):
            pts[i] = pts[i - 1] + u * 0.01 * i
    return pts


def _verify_overlap(rough: Trajectory, ctx: SceneContext, actor, crash_step: int) -> bool:
    ego_poses = rollout_trajectory(rough, ctx.ego)
    for i in range(max(0, crash_step - 2), min(len(ego_poses), crash_step + 1)):
        if sat_intersects(ctx.ego_obb(ego_poses[i]), actor.obb_at(i + 1)):
            return True
    return False


# ---------------------------------------------------------------------------
# Dynamic feasibility

def is_dynamically_feasible(t: Trajectory, ctx: SceneContext,
                            tracking_limit: float = TRACKING_ERROR_LIMIT,
                            lat_accel_limit: float = LATERAL_ACCEL_LIMIT) -> bool:
    """Bicycle rollout must stay near the route and within lateral-accel limits."""
    poses = rollout_trajectory(t, ctx.ego)
    route = t.route.points
    profile = speed_profile(t.speed)
    prev_yaw = ctx.ego.pose.yaw
    dt = t.speed.dt
    for pose, v in zip(poses, profile):
        d = np.min(np.linalg.norm(route - pose.position, axis=1))
        if d > tracking_limit:
            return False
        yaw_rate = abs(normalize_angle(pose.yaw - prev_yaw)) / dt
        if v * yaw_rate > lat_accel_limit:
            return False
        prev_yaw = pose.yaw
    return True


# ---------------------------------------------------------------------------
# Batch synthesis

def _kind_counts(mix: dict, count: int) -> dict:
    total = sum(mix.values())
    if abs(total - 1.0) > 1e-9:
        raise InvalidInputError(f"mix ratios must sum to 1, got {total}")
    counts = {k: int(math.floor(mix.get(k, 0.0) * count)) for k in KINDS}
    remainder = count - sum(counts.values())
    order = sorted(KINDS, key=lambda k: mix.get(k, 0.0) * count - counts[k], reverse=True)
    for k in order[:remainder]:
        counts[k] += 1
    return counts


def _collision_candidates(ctx: SceneContext, v_max: float = V_MAX_CRASH):
    """Forward-FOV actors paired with the crash steps reachable at <= v_max."""
    expert = ctx.expert
    dt = expert.speed.dt
    n_steps = len(expert.speed) - 1
    heading = ctx.ego.pose.heading()
    ego_pos = ctx.ego.pose.position
    delta = default_delta_safety(ctx)
    out = []
    for a in ctx.actors:
        rel = a.forecast[0][:2] - ego_pos
        r = float(np.linalg.norm(rel))
        # Tight forward cone: sharply off-axis targets need yaw rates the
        # bicycle rollout cannot track at collision speeds.
        if r < 1e-6 or float(np.dot(rel, heading)) / r <= 0.8:
            continue
        steps = []
        for s in range(max(2, int(round(0.5 / dt))), min(n_steps, len(a.forecast) - 1) + 1):
            dist = float(np.linalg.norm(a.forecast[s][:2] - ego_pos))
            v_crash = (dist - delta) / (s * dt)
            if 1e-9 < v_crash <= v_max:
                steps.append(s)
        if steps:
            out.append((a.actor_id, steps))
    return out


def _sample_spec(kind: str, ctx: SceneContext, rng: np.random.Generator, seed: int) -> PerturbationSpec:
    expert = ctx.expert
    if kind == "increase_speed":
        return PerturbationSpec(kind, {"gamma": float(rng.uniform(*GAMMA_AGGRESSIVE))}, seed)
    if kind == "reduce_speed":
        return PerturbationSpec(kind, {"gamma": float(rng.uniform(*GAMMA_CAUTIOUS))}, seed)
    if kind == "lane_change":
        n = len(expert.route)
        l_trans = int(rng.integers(8, max(9, n - 2)))
        k_start = int(rng.integers(1, max(2, n - l_trans)))
        w = float(rng.choice(ctx.lane_offsets))
        return PerturbationSpec(kind, {"w": w, "k_start": k_start, "l_trans": l_trans}, seed)
    # forced_collision: a forward-FOV actor and a crash time within the horizon
    candidates = _collision_candidates(ctx)
    if not candidates:
        raise InfeasibleError("no reachable forward-FOV collision candidates")
    i = int(rng.integers(len(candidates)))
    target, steps = candidates[i]
    step = int(rng.choice(steps))
    return PerturbationSpec(kind, {"target": target,
                                   "t_crash": float(step * expert.speed.dt)}, seed)


def apply_spec(spec: PerturbationSpec, ctx: SceneContext) -> Trajectory:
    expert = ctx.expert
    if spec.kind in ("increase_speed", "reduce_speed"):
        return scale_speed(expert, spec.params["gamma"])
    if spec.kind == "lane_change":
        return lane_deviation(expert, spec.params["w"],
                              spec.params["k_start"], spec.params["l_trans"])
    return forced_collision(expert, ctx, spec.params["target"], spec.params["t_crash"])


def synthesize_batch(scenes, count: int, seed: int, mix: dict | None = None,
                     thresholds=None):
    """Generate a corpus of (rough trajectory, critique, expert target) samples.

    Kind counts follow the mix exactly (up to rounding); draws are assigned to
    scenes round-robin and each draw owns a derived sub-seed, so output is
    reproducible and order-independent.
    """
    from .risk import RiskThresholds
    from .critique import build
    from .sceneio import CorpusRecord

    scenes = list(scenes)
    if not scenes:
        raise InvalidInputError("need at least one scene")
    mix = dict(DEFAULT_MIX if mix is None else mix)
    th = thresholds or RiskThresholds()
    counts = _kind_counts(mix, count)
    kinds = [k for k in KINDS for _ in range(counts[k])]
    order_rng = np.random.default_rng(np.random.SeedSequence((seed, 0xD0)))
    order_rng.shuffle(kinds)

    # Forced collisions need a reachable forward actor; assign those draws
    # round-robin over eligible scenes only.
    eligible = {k: scenes for k in KINDS}
    eligible["forced_collision"] = [s for s in scenes if _collision_candidates(s)]

    records = []
    skipped = []
    for j, kind in enumerate(kinds):
        pool = eligible[kind]
        if not pool:
            skipped.append({"draw": j, "kind": kind, "reason": "no eligible scene"})
            log.warning("skipping draw %d (%s): no eligible scene", j, kind)
            continue
        ctx = pool[j % len(pool)]
        sub_seed = int(np.random.SeedSequence((seed, j)).generate_state(1)[0])
        rng = np.random.default_rng(sub_seed)
        rough = None
        spec = None
        for _ in range(MAX_ATTEMPTS):
            try:
                spec = _sample_spec(kind, ctx, rng, sub_seed)
                cand = apply_spec(spec, ctx)
            except InfeasibleError:
                continue
            if kind == "forced_collision" or is_dynamically_feasible(cand, ctx):
                rough = cand
                break
        if rough is None:
            skipped.append({"draw": j, "kind": kind, "reason": "no feasible draw"})
            log.warning("skipping draw %d (%s): no feasible perturbation after %d attempts",
                        j, kind, MAX_ATTEMPTS)
            continue
        report = aggregate(rough, ctx, th)
        critique, text = build(report, rough, ctx.expert)
        records.append(CorpusRecord(
            record_id=f"{seed}-{j:06d}",
            source="EPAS",
            scene_id=ctx.scene_id,
            rough=rough,
            critique_text=text,
            flags=dict(critique.flags),
            refined=ctx.expert,
            provenance={"kind": spec.kind, "params": spec.params, "seed": spec.rng_seed},
        ))
    if skipped:
        log.info("synthesize_batch: %d/%d draws skipped", len(skipped), count)
    return records, {"requested": count, "emitted": len(records),
                     "kind_counts": counts, "skipped": skipped}
