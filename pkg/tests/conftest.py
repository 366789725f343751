import logging

import numpy as np
import pytest

from trajcritic.risk import Actor, Environment, SceneContext
from trajcritic.geom import BicycleState, Pose2D
from trajcritic.scenarios import desk_suite
from trajcritic.sim import build_context, expert_planner, run_episode
from trajcritic.traj import (
    SPEED_DT,
    RouteWaypoints,
    SpeedWaypoints,
    Trajectory,
)

logging.disable(logging.WARNING)


def straight_route(n=20, pitch=1.0, y=0.0):
    return np.column_stack([np.arange(n) * pitch, np.full(n, y)])


def constant_speed_points(v, n=10, dt=SPEED_DT, start=(0.0, 0.0), direction=(1.0, 0.0)):
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    return np.asarray(start) + np.outer(np.arange(n) * v * dt, d)


def make_traj(route=None, speeds=None, v=5.0):
    """A simple straight trajectory; `speeds` gives the 9 implied speeds."""
    route = straight_route() if route is None else np.asarray(route, dtype=float)
    if speeds is None:
        pts = constant_speed_points(v)
    else:
        pts = np.zeros((len(speeds) + 1, 2))
        for i, s in enumerate(speeds):
            pts[i + 1] = pts[i] + np.array([s * SPEED_DT, 0.0])
    return Trajectory(RouteWaypoints(route), SpeedWaypoints(pts, SPEED_DT))


def make_scene(expert=None, actors=(), **kw):
    expert = make_traj() if expert is None else expert
    defaults = dict(
        ego=BicycleState(Pose2D(0.0, 0.0, 0.0), 5.0),
        actors=tuple(actors),
        expert=expert,
        scene_id=kw.pop("scene_id", "scene"),
    )
    defaults.update(kw)
    return SceneContext(**defaults)


def make_actor(x, y, cls="vehicle", vx=0.0, vy=0.0, n=11, dt=SPEED_DT,
               half_length=2.3, half_width=0.95, actor_id="a0", yaw=0.0):
    fc = np.array([(x + vx * k * dt, y + vy * k * dt, yaw) for k in range(n)])
    return Actor(actor_id=actor_id, cls=cls, half_length=half_length,
                 half_width=half_width, forecast=fc, dt=dt)


@pytest.fixture(scope="session")
def suite_scenarios():
    return desk_suite()


# Snapshot times at which every scenario's expert plan is risk-free: the two
# context hazards (red light, stop sign) are over by these times, so a critic
# can always correct a perturbed plan and improvement ratios stay positive.
RISK_FREE_SNAPSHOT_TIMES = {"red_light": 16.0, "stop_sign_cross_traffic": 13.0}


def snapshot_context(scenario, t=0.0):
    """Scene context at time t of an expert-driven episode of the scenario."""
    if t == 0.0:
        return build_context(scenario, scenario.ego_start, 0.0)
    res = run_episode(scenario, expert_planner)
    row = min(res.telemetry, key=lambda r: abs(r["t"] - t))
    state = BicycleState(Pose2D(row["x"], row["y"], row["yaw"]), row["v"])
    return build_context(scenario, state, row["t"])


def risk_free_scenes(scenarios):
    return [snapshot_context(sc, RISK_FREE_SNAPSHOT_TIMES.get(sc.name, 0.0))
            for sc in scenarios]


@pytest.fixture(scope="session")
def suite_scenes(suite_scenarios):
    """One scene context per shipped scenario, taken at a time where the
    expert plan trips no risk flag."""
    return risk_free_scenes(suite_scenarios)
