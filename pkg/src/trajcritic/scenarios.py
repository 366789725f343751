"""The built-in 12-scenario desk suite.

Scenarios are small deterministic worlds on a mostly-straight road: lead
vehicles that stop and resume, crossing pedestrians and vehicles, a red light
with a time-windowed keep-out zone, narrow corridors, parked cars, oncoming
traffic, and two curves. Every expert speed plan stops well short of its
hazard so that the reference plan is collision-free.
"""

from __future__ import annotations

import math

import numpy as np

from .geom import BicycleState, Pose2D
from .risk import Environment
from .sim import ActorScript, ForbiddenZone, Scenario

CAR = dict(half_length=2.3, half_width=0.95)
PED = dict(half_length=0.3, half_width=0.3)


def _straight_goal(length: float) -> np.ndarray:
    n = int(length) + 1
    return np.column_stack([np.linspace(0.0, length, n), np.zeros(n)])


def _curve_goal(lead_in: float, radius: float, arc_deg: float, lead_out: float,
                step: float = 1.0) -> np.ndarray:
    pts = [np.array([x, 0.0]) for x in np.arange(0.0, lead_in, step)]
    arc_rad = math.radians(arc_deg)
    n_arc = int(radius * arc_rad / step)
    cx, cy = lead_in, radius
    for i in range(n_arc + 1):
        a = arc_rad * i / n_arc
        pts.append(np.array([cx + radius * math.sin(a), cy - radius * math.cos(a)]))
    end = pts[-1]
    heading = arc_rad
    d = np.array([math.cos(heading), math.sin(heading)])
    for i in range(1, int(lead_out) + 1):
        pts.append(end + d * i)
    return np.asarray(pts)


def _ego(speed: float) -> BicycleState:
    return BicycleState(Pose2D(0.0, 0.0, 0.0), speed)


def _rect(x0, x1, y0, y1) -> np.ndarray:
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])


def straight_clear() -> Scenario:
    return Scenario(
        name="straight_clear", duration=15.0, goal=_straight_goal(60),
        speed_plan=((0.0, 6.0), (15.0, 6.0)), ego_start=_ego(6.0),
    )


def lead_vehicle_stop() -> Scenario:
    lead = ActorScript(
        actor_id="lead", cls="vehicle", **CAR,
        keyframes=np.array([
            (0.0, 20.0, 0.0, 0.0),
            (2.0, 32.0, 0.0, 0.0),
            (4.0, 38.0, 0.0, 0.0),   # braked to a stop
            (10.0, 38.0, 0.0, 0.0),
            (12.0, 46.0, 0.0, 0.0),  # resumes faster than the ego
            (30.0, 190.0, 0.0, 0.0),
        ]),
    )
    return Scenario(
        name="lead_vehicle_stop", duration=30.0, goal=_straight_goal(70),
        speed_plan=((0.0, 6.0), (2.0, 6.0), (5.0, 0.0), (11.0, 0.0), (13.0, 6.0), (30.0, 6.0)),
        ego_start=_ego(6.0), actors=(lead,),
    )


def crossing_pedestrian() -> Scenario:
    ped = ActorScript(
        actor_id="ped", cls="pedestrian", **PED,
        keyframes=np.array([
            (0.0, 30.0, 8.0, -math.pi / 2),
            (12.5, 30.0, -12.0, -math.pi / 2),
        ]),
    )
    return Scenario(
        name="crossing_pedestrian", duration=25.0, goal=_straight_goal(60),
        speed_plan=((0.0, 6.0), (1.5, 6.0), (3.5, 0.0), (6.5, 0.0), (8.5, 6.0), (25.0, 6.0)),
        ego_start=_ego(6.0), actors=(ped,),
    )


def red_light() -> Scenario:
    return Scenario(
        name="red_light", duration=30.0, goal=_straight_goal(60),
        speed_plan=((0.0, 6.0), (1.0, 6.0), (3.5, 0.0), (14.0, 0.0), (16.0, 6.0), (30.0, 6.0)),
        ego_start=_ego(6.0),
        forbidden_zones=(ForbiddenZone(_rect(26.0, 38.0, -4.0, 4.0), 0.0, 14.0),),
        light_schedule=((0.0, "red"), (14.0, "green")),
    )


def narrow_corridor() -> Scenario:
    return Scenario(
        name="narrow_corridor", duration=15.0, goal=_straight_goal(50),
        speed_plan=((0.0, 5.0), (15.0, 5.0)), ego_start=_ego(5.0),
        forbidden_zones=(
            ForbiddenZone(_rect(10.0, 40.0, 1.3, 4.0)),
            ForbiddenZone(_rect(10.0, 40.0, -4.0, -1.3)),
        ),
    )


def gentle_curve() -> Scenario:
    return Scenario(
        name="gentle_curve", duration=25.0,
        goal=_curve_goal(10.0, 20.0, 90.0, 10.0),
        speed_plan=((0.0, 5.0), (25.0, 5.0)), ego_start=_ego(5.0),
    )


def cut_in_slow() -> Scenario:
    lead = ActorScript(
        actor_id="merger", cls="vehicle", **CAR,
        keyframes=np.array([
            (0.0, 15.0, 3.5, 0.0),
            (2.0, 27.0, 3.5, 0.0),
            (4.0, 39.0, 0.0, -0.15),  # merges into the ego lane
            (5.0, 43.5, 0.0, 0.0),
            (30.0, 143.5, 0.0, 0.0),  # then holds 4 m/s
        ]),
    )
    return Scenario(
        name="cut_in_slow", duration=25.0, goal=_straight_goal(70),
        speed_plan=((0.0, 6.0), (3.0, 6.0), (6.0, 3.8), (25.0, 3.8)),
        ego_start=_ego(6.0), actors=(lead,),
    )


def parked_cars() -> Scenario:
    actors = tuple(
        ActorScript(
            actor_id=f"parked{i}", cls="static", **CAR,
            keyframes=np.array([(0.0, x, y, 0.0), (15.0, x, y, 0.0)]),
        )
        for i, (x, y) in enumerate([(15.0, 2.6), (25.0, -2.6), (35.0, 2.6)])
    )
    return Scenario(
        name="parked_cars", duration=15.0, goal=_straight_goal(50),
        speed_plan=((0.0, 5.0), (15.0, 5.0)), ego_start=_ego(5.0), actors=actors,
    )


def sharp_curve() -> Scenario:
    return Scenario(
        name="sharp_curve", duration=25.0,
        goal=_curve_goal(10.0, 12.0, 90.0, 10.0),
        speed_plan=((0.0, 4.5), (2.0, 4.5), (4.0, 3.5), (8.0, 3.5), (10.0, 4.5), (25.0, 4.5)),
        ego_start=_ego(4.5),
    )


def stop_sign_cross_traffic() -> Scenario:
    crosser = ActorScript(
        actor_id="crosser", cls="vehicle", **CAR,
        keyframes=np.array([
            (0.0, 32.0, 45.0, -math.pi / 2),
            (20.0, 32.0, -55.0, -math.pi / 2),
        ]),
    )
    return Scenario(
        name="stop_sign_cross_traffic", duration=30.0, goal=_straight_goal(60),
        speed_plan=((0.0, 5.0), (1.5, 5.0), (3.5, 0.0), (11.0, 0.0), (13.0, 5.0), (30.0, 5.0)),
        ego_start=_ego(5.0), actors=(crosser,), stop_sign_until=11.0,
    )


def oncoming_traffic() -> Scenario:
    oncoming = ActorScript(
        actor_id="oncoming", cls="vehicle", **CAR,
        keyframes=np.array([
            (0.0, 80.0, 2.8, math.pi),
            (20.0, -60.0, 2.8, math.pi),
        ]),
    )
    return Scenario(
        name="oncoming_traffic", duration=20.0, goal=_straight_goal(60),
        speed_plan=((0.0, 6.0), (20.0, 6.0)), ego_start=_ego(6.0), actors=(oncoming,),
    )


def double_lead_stop() -> Scenario:
    lead1 = ActorScript(
        actor_id="lead1", cls="vehicle", **CAR,
        keyframes=np.array([
            (0.0, 18.0, 0.0, 0.0), (2.0, 30.0, 0.0, 0.0), (4.0, 36.0, 0.0, 0.0),
            (10.0, 36.0, 0.0, 0.0), (12.0, 44.0, 0.0, 0.0), (30.0, 188.0, 0.0, 0.0),
        ]),
    )
    lead2 = ActorScript(
        actor_id="lead2", cls="vehicle", **CAR,
        keyframes=np.array([
            (0.0, 28.0, 0.0, 0.0), (2.0, 40.0, 0.0, 0.0), (4.0, 46.0, 0.0, 0.0),
            (10.0, 46.0, 0.0, 0.0), (12.0, 54.0, 0.0, 0.0), (30.0, 198.0, 0.0, 0.0),
        ]),
    )
    return Scenario(
        name="double_lead_stop", duration=30.0, goal=_straight_goal(70),
        speed_plan=((0.0, 6.0), (2.0, 6.0), (5.0, 0.0), (11.0, 0.0), (13.0, 6.0), (30.0, 6.0)),
        ego_start=_ego(6.0), actors=(lead1, lead2),
    )


def desk_suite() -> list:
    """The 12 shipped scenarios, in a fixed order."""
    return [
        straight_clear(),
        lead_vehicle_stop(),
        crossing_pedestrian(),
        red_light(),
        narrow_corridor(),
        gentle_curve(),
        cut_in_slow(),
        parked_cars(),
        sharp_curve(),
        stop_sign_cross_traffic(),
        oncoming_traffic(),
        double_lead_stop(),
    ]
