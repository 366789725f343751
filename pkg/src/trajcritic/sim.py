"""Desk-scale closed-loop world: scripted actor playback, an ego vehicle driven
by the PID control stack along (optionally critic-refined) planned
trajectories, and per-episode collision / route-completion metrics.

Everything is deterministic given the scenario and seed: actors replay pose
timelines, planning happens on a fixed period, and physics ticks at a fixed
rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .control import (
    MAX_STEER_ANGLE,
    BrakeConfig,
    LateralController,
    LongitudinalController,
    brake_logic,
)
from .errors import InvalidInputError
from .geom import (
    BicycleState,
    Obb,
    Pose2D,
    bicycle_step,
    point_in_polygon,
    point_to_polyline_distance,
    sat_intersects,
)
from .refine import CriticConfig, oracle_critic
from .risk import Actor, Environment, SceneContext
from .traj import (
    ROUTE_POINTS,
    SPEED_DT,
    SPEED_POINTS,
    PchipPath,
    RouteWaypoints,
    SpeedWaypoints,
    Trajectory,
    speed_profile,
)

MAX_ACCEL = 3.0    # m/s^2, full throttle
BRAKE_DECEL = 6.0  # m/s^2


@dataclass(frozen=True)
class ActorScript:
    actor_id: str
    cls: str
    half_length: float
    half_width: float
    keyframes: np.ndarray  # (K, 4) rows of (t, x, y, yaw)

    def __post_init__(self):
        kf = np.asarray(self.keyframes, dtype=float)
        if kf.ndim != 2 or kf.shape[1] != 4 or len(kf) < 1:
            raise InvalidInputError("keyframes must be (K, 4) rows of (t, x, y, yaw)")
        object.__setattr__(self, "keyframes", kf)

    def pose_at(self, t: float) -> Pose2D:
        kf = self.keyframes
        ts = kf[:, 0]
        x = float(np.interp(t, ts, kf[:, 1]))
        y = float(np.interp(t, ts, kf[:, 2]))
        # Yaw interpolated through unwrapped angles to avoid wrap jumps
        yaw = float(np.interp(t, ts, np.unwrap(kf[:, 3])))
        return Pose2D(x, y, yaw)

    def obb_at(self, t: float) -> Obb:
        return Obb(self.pose_at(t), self.half_length, self.half_width)

    def forecast(self, t0: float, steps: int, dt: float) -> np.ndarray:
        out = np.empty((steps, 3))
        for i in range(steps):
            p = self.pose_at(t0 + i * dt)
            out[i] = (p.x, p.y, p.yaw)
        return out


@dataclass(frozen=True)
class ForbiddenZone:
    polygon: np.ndarray  # (N, 2)
    t_on: float = 0.0
    t_off: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "polygon", np.asarray(self.polygon, dtype=float))

    def active(self, t: float) -> bool:
        return self.t_on <= t < self.t_off


@dataclass(frozen=True)
class Scenario:
    name: str
    duration: float
    goal: np.ndarray  # (N, 2) route-completion polyline
    speed_plan: tuple  # ((t, v), ...) breakpoints for the expert target speed
    ego_start: BicycleState = BicycleState(Pose2D(0.0, 0.0, 0.0), 0.0)
    tick: float = 0.05
    plan_period: float = 0.5
    completion_radius: float = 2.0
    actors: tuple = ()
    forbidden_zones: tuple = ()
    speed_limit: float = 13.9
    light_schedule: tuple = ()  # ((t, state), ...) step changes; empty = "none"
    stop_sign_until: float = 0.0  # stop sign active while t < this
    environment: Environment = Environment()

    def __post_init__(self):
        if self.tick <= 0 or self.duration < self.tick:
            raise InvalidInputError("tick must be positive and duration >= tick")
        object.__setattr__(self, "goal", np.asarray(self.goal, dtype=float))

    def light_at(self, t: float) -> str:
        state = "none"
        for t_change, s in self.light_schedule:
            if t >= t_change:
                state = s
        return state

    def plan_speed_at(self, t: float) -> float:
        plan = np.asarray(self.speed_plan, dtype=float)
        return float(np.interp(t, plan[:, 0], plan[:, 1]))


@dataclass(frozen=True)
class EpisodeResult:
    success: bool
    collision: bool
    collision_actor: str | None
    collision_time: float | None
    forbidden_entry: bool
    route_completion: float
    max_cte: float
    refinement_used: bool
    end_time: float
    telemetry: tuple = field(repr=False, default=())


# ---------------------------------------------------------------------------
# Goal-path helpers

def _polyline_arcs(pts: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])


def _project_arc(pts: np.ndarray, arcs: np.ndarray, p: np.ndarray) -> float:
    """Arc-length position of the closest point on the polyline."""
    a = pts[:-1]
    d = np.diff(pts, axis=0)
    L2 = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.einsum("ij,ij->i", p - a, d) / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
    t = np.where(L2 > 0, t, 0.0)
    closest = a + t[:, None] * d
    i = int(np.argmin(np.einsum("ij,ij->i", closest - p, closest - p)))
    return float(arcs[i] + t[i] * math.sqrt(L2[i]))


def _point_at_arc(pts: np.ndarray, arcs: np.ndarray, s: float) -> np.ndarray:
    """Point at arc position s, extrapolating along the final tangent past the end."""
    if s <= arcs[-1]:
        x = np.interp(s, arcs, pts[:, 0])
        y = np.interp(s, arcs, pts[:, 1])
        return np.array([x, y])
    tail = pts[-1] - pts[-2]
    tail = tail / max(np.linalg.norm(tail), 1e-9)
    return pts[-1] + tail * (s - arcs[-1])


def expert_trajectory(scenario: Scenario, state: BicycleState, t: float) -> Trajectory:
    """Reference plan: follow the goal polyline at the scenario's speed plan."""
    goal = scenario.goal
    arcs = _polyline_arcs(goal)
    s0 = _project_arc(goal, arcs, state.pose.position)
    route = np.array([_point_at_arc(goal, arcs, s0 + k) for k in range(ROUTE_POINTS)])
    speed_pts = [np.asarray(_point_at_arc(goal, arcs, s0))]
    s = s0
    for k in range(1, SPEED_POINTS):
        v = scenario.plan_speed_at(t + (k - 1) * SPEED_DT)
        s = s + v * SPEED_DT
        speed_pts.append(_point_at_arc(goal, arcs, s))
    return Trajectory(RouteWaypoints(route), SpeedWaypoints(np.asarray(speed_pts), SPEED_DT))


def build_context(scenario: Scenario, state: BicycleState, t: float) -> SceneContext:
    actors = tuple(
        Actor(
            actor_id=s.actor_id,
            cls=s.cls,
            half_length=s.half_length,
            half_width=s.half_width,
            forecast=s.forecast(t, SPEED_POINTS + 1, SPEED_DT),
            dt=SPEED_DT,
        )
        for s in scenario.actors
    )
    zones = tuple(z.polygon for z in scenario.forbidden_zones if z.active(t))
    return SceneContext(
        ego=state,
        actors=actors,
        speed_limit=scenario.speed_limit,
        traffic_light=scenario.light_at(t),
        stop_sign_active=t < scenario.stop_sign_until,
        environment=scenario.environment,
        expert=expert_trajectory(scenario, state, t),
        forbidden_zones=zones,
        scene_id=scenario.name,
    )


# ---------------------------------------------------------------------------
# Planners

def expert_planner(ctx: SceneContext, t: float) -> Trajectory:
    return ctx.expert


def constant_speed_planner(speed: float):
    """A planner that follows the expert route but ignores the speed plan and
    all actors (useful as a deliberately unsafe baseline)."""

    def plan(ctx: SceneContext, t: float) -> Trajectory:
        expert = ctx.expert
        route = expert.route.points
        path = PchipPath(route)
        arcs = np.minimum(np.arange(SPEED_POINTS) * speed * SPEED_DT, path.total_length)
        return Trajectory(expert.route, SpeedWaypoints(path(arcs), SPEED_DT))

    return plan


def degrade_planner(planner, sigma: float, seed: int):
    """Wrap a planner with i.i.d. Gaussian waypoint noise of std sigma."""
    if sigma < 0:
        raise InvalidInputError("sigma must be nonnegative")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xA0)))

    def plan(ctx: SceneContext, t: float) -> Trajectory:
        a = planner(ctx, t)
        if sigma == 0.0:
            return a
        route = a.route.points + rng.normal(0.0, sigma, a.route.points.shape)
        speed = a.speed.points + rng.normal(0.0, sigma, a.speed.points.shape)
        return Trajectory(RouteWaypoints(route), SpeedWaypoints(speed, a.speed.dt))

    return plan


# ---------------------------------------------------------------------------
# Episode loop

def run_episode(scenario: Scenario, planner, refine_steps: int = 0,
                critic_cfg: CriticConfig = CriticConfig(),
                lateral: LateralController | None = None,
                longitudinal: LongitudinalController | None = None,
                brake_cfg: BrakeConfig = BrakeConfig(),
                seed: int = 0) -> EpisodeResult:
    """Run one closed-loop episode. Deterministic given (scenario, planner, seed)."""
    lateral = lateral or LateralController()
    longitudinal = longitudinal or LongitudinalController()
    state = scenario.ego_start
    goal = scenario.goal
    arcs = _polyline_arcs(goal)
    total_len = float(arcs[-1])

    t = 0.0
    next_plan = 0.0
    plan_t0 = 0.0
    route_dense = None
    speed_interp = None
    telemetry = []
    collision_actor = None
    collision_time = None
    forbidden_entry = False
    max_cte = 0.0
    completion = 0.0

    n_ticks = int(round(scenario.duration / scenario.tick))
    for _ in range(n_ticks):
        if t >= next_plan - 1e-9:
            ctx = build_context(scenario, state, t)
            a = planner(ctx, t)
            for _ in range(refine_steps):
                _, _, a_next = oracle_critic(a, ctx, critic_cfg)
                a = a_next
            path = PchipPath(a.route.points)
            route_dense = path(np.arange(0.0, path.total_length, 0.25))
            profile = speed_profile(a.speed)
            times = np.arange(len(profile)) * a.speed.dt
            if len(profile) > 1:
                interp = PchipInterpolator(times, profile)
            else:
                interp = lambda _x: profile[0]
            horizon = float(times[-1])
            speed_interp = (interp, horizon, profile)
            plan_t0 = t
            next_plan += scenario.plan_period

        interp, horizon, profile = speed_interp
        tau = min(t - plan_t0, horizon)
        desired = max(0.0, float(interp(tau)))
        steer_cmd = lateral.step(state, route_dense, scenario.tick)
        brake = brake_logic(state.speed, desired, brake_cfg)
        throttle = 0.0 if brake else longitudinal.step(state.speed, desired, scenario.tick)
        accel = -BRAKE_DECEL if brake else throttle * MAX_ACCEL
        steer_angle = -steer_cmd * MAX_STEER_ANGLE
        state = bicycle_step(state, steer_angle, accel, scenario.tick)
        t += scenario.tick

        pos = state.pose.position
        ego_box = Obb(state.pose, 2.3, 0.95)
        for script in scenario.actors:
            if sat_intersects(ego_box, script.obb_at(t)):
                collision_actor = script.actor_id
                collision_time = t
                break
        for zone in scenario.forbidden_zones:
            if zone.active(t) and point_in_polygon(pos, zone.polygon):
                forbidden_entry = True
                break
        s_proj = _project_arc(goal, arcs, pos)
        completion = max(completion, s_proj / total_len if total_len > 0 else 0.0)
        cte = _cte_to_polyline(pos, goal)
        max_cte = max(max_cte, cte)
        telemetry.append({
            "t": round(t, 6), "x": state.pose.x, "y": state.pose.y,
            "yaw": state.pose.yaw, "v": state.speed,
            "steer": steer_cmd, "throttle": throttle, "brake": brake,
            "desired": desired, "cte": cte,
        })
        if collision_actor is not None:
            break
        if float(np.linalg.norm(pos - goal[-1])) < scenario.completion_radius:
            completion = 1.0
            break

    collision = collision_actor is not None
    success = (not collision) and (not forbidden_entry) and completion >= 0.98
    return EpisodeResult(
        success=success,
        collision=collision,
        collision_actor=collision_actor,
        collision_time=collision_time,
        forbidden_entry=forbidden_entry,
        route_completion=min(completion, 1.0),
        max_cte=max_cte,
        refinement_used=refine_steps > 0,
        end_time=t,
        telemetry=tuple(telemetry),
    )


def _cte_to_polyline(p: np.ndarray, poly: np.ndarray) -> float:
    return point_to_polyline_distance(p, poly)


# ---------------------------------------------------------------------------
# Suite driver

def run_suite(scenarios, variants: dict, seeds, sigma: float = 0.0,
              critic_cfg: CriticConfig = CriticConfig()) -> dict:
    """Run every scenario x variant x seed; variants map names to refine step
    counts. Returns an aggregate report."""
    scenarios = list(scenarios)
    seeds = list(seeds)
    if not scenarios or not variants or not seeds:
        raise InvalidInputError("scenarios, variants and seeds must be nonempty")
    report = {"sigma": sigma, "seeds": seeds, "variants": {}}
    for name, steps in variants.items():
        episodes = []
        for seed in seeds:
            for i, scenario in enumerate(scenarios):
                planner = degrade_planner(expert_planner, sigma, seed * 1000 + i)
                res = run_episode(scenario, planner, refine_steps=steps,
                                  critic_cfg=critic_cfg, seed=seed)
                episodes.append({
                    "scenario": scenario.name, "seed": seed,
                    "success": res.success, "collision": res.collision,
                    "forbidden_entry": res.forbidden_entry,
                    "route_completion": res.route_completion,
                    "max_cte": res.max_cte,
                })
        n = len(episodes)
        report["variants"][name] = {
            "refine_steps": steps,
            "episodes": episodes,
            "success_rate": sum(e["success"] for e in episodes) / n,
            "collision_rate": sum(e["collision"] for e in episodes) / n,
            "mean_route_completion": sum(e["route_completion"] for e in episodes) / n,
            "mean_max_cte": sum(e["max_cte"] for e in episodes) / n,
            "max_cte": max(e["max_cte"] for e in episodes),
            "per_seed_success": {
                str(seed): sum(e["success"] for e in episodes if e["seed"] == seed)
                / len(scenarios)
                for seed in seeds
            },
        }
    return report
