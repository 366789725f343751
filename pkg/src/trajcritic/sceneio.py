"""Serialization for scenes, scenarios, trajectories, corpus records, mix
manifests, and reports.

Scenes/scenarios are single JSON documents with an explicit schema_version;
corpora are line-delimited JSON (one record per line). Units are meters,
seconds, radians throughout; angles appear in degrees only inside
human-facing critique text. Writers emit canonical (sorted-key) JSON, so a
save/load/save cycle is byte-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, SchemaError
from .geom import BicycleState, Pose2D
from .risk import Actor, Environment, SceneContext
from .sim import ActorScript, ForbiddenZone, Scenario
from .traj import RouteWaypoints, SpeedWaypoints, Trajectory

SCHEMA_VERSION = 1


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise SchemaError(f"{where}: missing required field {key!r}")
    return obj[key]


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ": "), indent=1)


def save_json(obj, path):
    Path(path).write_text(_dump(obj) + "\n")


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e


# ---------------------------------------------------------------------------
# Trajectories

def trajectory_to_dict(t: Trajectory) -> dict:
    return {
        "route": [[float(x), float(y)] for x, y in t.route.points],
        "speed": {
            "points": [[float(x), float(y)] for x, y in t.speed.points],
            "dt": float(t.speed.dt),
        },
    }


def trajectory_from_dict(d: dict, where: str = "trajectory") -> Trajectory:
    route = _require(d, "route", where)
    speed = _require(d, "speed", where)
    try:
        return Trajectory(
            RouteWaypoints(np.asarray(route, dtype=float)),
            SpeedWaypoints(np.asarray(_require(speed, "points", f"{where}.speed"), dtype=float),
                           float(_require(speed, "dt", f"{where}.speed"))),
        )
    except (ValueError, InvalidInputError) as e:
        raise SchemaError(f"{where}: {e}") from e


def save_trajectory(t: Trajectory, path):
    save_json({"schema_version": SCHEMA_VERSION, **trajectory_to_dict(t)}, path)


def load_trajectory(path) -> Trajectory:
    return trajectory_from_dict(load_json(path), str(path))


# ---------------------------------------------------------------------------
# Scenes

def scene_to_dict(ctx: SceneContext) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "scene_id": ctx.scene_id,
        "ego": {
            "x": ctx.ego.pose.x, "y": ctx.ego.pose.y, "yaw": ctx.ego.pose.yaw,
            "speed": ctx.ego.speed, "wheelbase": ctx.ego.wheelbase,
        },
        "ego_half_length": ctx.ego_half_length,
        "ego_half_width": ctx.ego_half_width,
        "actors": [
            {
                "id": a.actor_id, "cls": a.cls,
                "half_length": a.half_length, "half_width": a.half_width,
                "z_interval": [float(a.z_interval[0]), float(a.z_interval[1])],
                "dt": a.dt,
                "forecast": [[float(x), float(y), float(yaw)] for x, y, yaw in a.forecast],
            }
            for a in ctx.actors
        ],
        "speed_limit": ctx.speed_limit,
        "traffic_light": ctx.traffic_light,
        "stop_sign_active": ctx.stop_sign_active,
        "environment": {
            "wetness": ctx.environment.wetness,
            "visibility": ctx.environment.visibility,
        },
        "expert": trajectory_to_dict(ctx.expert) if ctx.expert is not None else None,
        "forbidden_zones": [[[float(x), float(y)] for x, y in z] for z in ctx.forbidden_zones],
        "lane_offsets": [float(w) for w in ctx.lane_offsets],
    }


def scene_from_dict(d: dict, where: str = "scene") -> SceneContext:
    ego = _require(d, "ego", where)
    for key in ("x", "y", "yaw", "speed"):
        _require(ego, key, f"{where}.ego")
    _require(d, "speed_limit", where)
    _require(d, "expert", where)
    env = d.get("environment", {})
    try:
        return SceneContext(
            ego=BicycleState(Pose2D(ego["x"], ego["y"], ego["yaw"]),
                             ego["speed"], ego.get("wheelbase", 2.9)),
            actors=tuple(
                Actor(
                    actor_id=a["id"], cls=_require(a, "cls", f"{where}.actors"),
                    half_length=a["half_length"], half_width=a["half_width"],
                    forecast=np.asarray(_require(a, "forecast", f"{where}.actors"), dtype=float),
                    dt=a.get("dt", 0.25),
                    z_interval=tuple(a.get("z_interval", (0.0, 1.8))),
                )
                for a in d.get("actors", [])
            ),
            speed_limit=float(d["speed_limit"]),
            traffic_light=d.get("traffic_light", "none"),
            stop_sign_active=bool(d.get("stop_sign_active", False)),
            environment=Environment(env.get("wetness", 0.0), env.get("visibility", "clear")),
            expert=trajectory_from_dict(d["expert"], f"{where}.expert")
            if d["expert"] is not None else None,
            forbidden_zones=tuple(np.asarray(z, dtype=float) for z in d.get("forbidden_zones", [])),
            lane_offsets=tuple(d.get("lane_offsets", (-3.5, 3.5))),
            scene_id=d.get("scene_id", "scene"),
        )
    except (KeyError, ValueError, InvalidInputError) as e:
        raise SchemaError(f"{where}: {e}") from e


def save_scene(ctx: SceneContext, path):
    save_json(scene_to_dict(ctx), path)


def load_scene(path) -> SceneContext:
    return scene_from_dict(load_json(path), str(path))


# ---------------------------------------------------------------------------
# Scenarios

def scenario_to_dict(s: Scenario) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": s.name,
        "duration": s.duration,
        "tick": s.tick,
        "plan_period": s.plan_period,
        "ego_start": {
            "x": s.ego_start.pose.x, "y": s.ego_start.pose.y, "yaw": s.ego_start.pose.yaw,
            "speed": s.ego_start.speed, "wheelbase": s.ego_start.wheelbase,
        },
        "goal": [[float(x), float(y)] for x, y in s.goal],
        "completion_radius": s.completion_radius,
        "speed_plan": [[float(t), float(v)] for t, v in s.speed_plan],
        "actors": [
            {
                "id": a.actor_id, "cls": a.cls,
                "half_length": a.half_length, "half_width": a.half_width,
                "keyframes": [[float(v) for v in row] for row in a.keyframes],
            }
            for a in s.actors
        ],
        "forbidden_zones": [
            {
                "polygon": [[float(x), float(y)] for x, y in z.polygon],
                "t_on": z.t_on,
                "t_off": "inf" if math.isinf(z.t_off) else z.t_off,
            }
            for z in s.forbidden_zones
        ],
        "speed_limit": s.speed_limit,
        "light_schedule": [[float(t), state] for t, state in s.light_schedule],
        "stop_sign_until": s.stop_sign_until,
        "environment": {
            "wetness": s.environment.wetness,
            "visibility": s.environment.visibility,
        },
    }


def scenario_from_dict(d: dict, where: str = "scenario") -> Scenario:
    ego = _require(d, "ego_start", where)
    env = d.get("environment", {})
    try:
        return Scenario(
            name=_require(d, "name", where),
            duration=float(_require(d, "duration", where)),
            goal=np.asarray(_require(d, "goal", where), dtype=float),
            speed_plan=tuple((float(t), float(v)) for t, v in _require(d, "speed_plan", where)),
            ego_start=BicycleState(Pose2D(ego["x"], ego["y"], ego["yaw"]),
                                   ego["speed"], ego.get("wheelbase", 2.9)),
            tick=float(d.get("tick", 0.05)),
            plan_period=float(d.get("plan_period", 0.5)),
            completion_radius=float(d.get("completion_radius", 2.0)),
            actors=tuple(
                ActorScript(
                    actor_id=a["id"], cls=a["cls"],
                    half_length=a["half_length"], half_width=a["half_width"],
                    keyframes=np.asarray(a["keyframes"], dtype=float),
                )
                for a in d.get("actors", [])
            ),
            forbidden_zones=tuple(
                ForbiddenZone(
                    polygon=np.asarray(z["polygon"], dtype=float),
                    t_on=float(z.get("t_on", 0.0)),
                    t_off=math.inf if z.get("t_off", "inf") == "inf" else float(z["t_off"]),
                )
                for z in d.get("forbidden_zones", [])
            ),
            speed_limit=float(d.get("speed_limit", 13.9)),
            light_schedule=tuple((float(t), s) for t, s in d.get("light_schedule", [])),
            stop_sign_until=float(d.get("stop_sign_until", 0.0)),
            environment=Environment(env.get("wetness", 0.0), env.get("visibility", "clear")),
        )
    except (KeyError, ValueError, InvalidInputError) as e:
        raise SchemaError(f"{where}: {e}") from e


def save_scenario(s: Scenario, path):
    save_json(scenario_to_dict(s), path)


def load_scenario(path) -> Scenario:
    return scenario_from_dict(load_json(path), str(path))


# ---------------------------------------------------------------------------
# Corpus records

SOURCES = ("MGS", "EPAS", "GT")


@dataclass(frozen=True)
class CorpusRecord:
    record_id: str
    source: str  # MGS | EPAS | GT
    scene_id: str
    rough: Trajectory
    critique_text: str
    flags: dict
    refined: Trajectory
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.source not in SOURCES:
            raise InvalidInputError(f"unknown corpus source {self.source!r}")
        if self.source == "GT":
            if any(self.flags.values()):
                raise InvalidInputError("GT records must carry all-false risk flags")
            same = (np.array_equal(self.rough.route.points, self.refined.route.points)
                    and np.array_equal(self.rough.speed.points, self.refined.speed.points))
            if not same:
                raise InvalidInputError("GT records must have rough == refined")
        if self.source == "EPAS" and "kind" not in self.provenance:
            raise InvalidInputError("EPAS records must carry a perturbation spec")


def record_to_dict(r: CorpusRecord) -> dict:
    return {
        "record_id": r.record_id,
        "source": r.source,
        "scene_id": r.scene_id,
        "rough": trajectory_to_dict(r.rough),
        "critique_text": r.critique_text,
        "flags": dict(sorted(r.flags.items())),
        "refined": trajectory_to_dict(r.refined),
        "provenance": r.provenance,
    }


def record_from_dict(d: dict, where: str = "record") -> CorpusRecord:
    try:
        return CorpusRecord(
            record_id=_require(d, "record_id", where),
            source=_require(d, "source", where),
            scene_id=d.get("scene_id", "scene"),
            rough=trajectory_from_dict(_require(d, "rough", where), f"{where}.rough"),
            critique_text=d.get("critique_text", ""),
            flags=_require(d, "flags", where),
            refined=trajectory_from_dict(_require(d, "refined", where), f"{where}.refined"),
            provenance=d.get("provenance", {}),
        )
    except InvalidInputError as e:
        raise SchemaError(f"{where}: {e}") from e


def save_corpus(records, path):
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(record_to_dict(r), sort_keys=True) + "\n")


def load_corpus(path) -> list:
    records = []
    with open(path) as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaError(f"{path}:{i}: invalid JSON: {e.msg}") from e
            records.append(record_from_dict(d, f"{path}:{i}"))
    return records


# ---------------------------------------------------------------------------
# Dataset mixing

GT_SHARE = 0.15   # unperturbed GT share of the (MGS+GT) pool
EPAS_SHARE = 0.5  # EPAS share in full mode


def mix_dataset(mgs, epas, gt, mode: str, epoch_size: int, seed: int):
    """Sample an epoch with replacement at the fixed composition ratios.

    base mode: 85% MGS / 15% GT. full mode: 50% EPAS, the other half again
    85/15 MGS/GT. Returns (records, manifest); counts are exact up to rounding
    and the manifest records them.
    """
    if epoch_size <= 0:
        raise InvalidInputError("epoch_size must be positive")
    if mode not in ("base", "full"):
        raise InvalidInputError(f"unknown mode {mode!r}")
    mgs, epas, gt = list(mgs), list(epas), list(gt)
    if mode == "base":
        counts = {"EPAS": 0}
        counts["GT"] = round(GT_SHARE * epoch_size)
        counts["MGS"] = epoch_size - counts["GT"]
    else:
        counts = {"EPAS": round(EPAS_SHARE * epoch_size)}
        rest = epoch_size - counts["EPAS"]
        counts["GT"] = round(GT_SHARE * rest)
        counts["MGS"] = rest - counts["GT"]
    pools = {"MGS": mgs, "EPAS": epas, "GT": gt}
    for source, n in counts.items():
        if n > 0 and not pools[source]:
            raise InvalidInputError(f"empty {source} pool but {n} samples requested")

    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x317)))
    sampled = []
    for source in ("MGS", "EPAS", "GT"):
        pool = pools[source]
        if counts[source] == 0:
            continue
        idx = rng.integers(0, len(pool), size=counts[source])
        sampled.extend(pool[i] for i in idx)
    order = rng.permutation(len(sampled))
    sampled = [sampled[i] for i in order]
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "mode": mode,
        "epoch_size": epoch_size,
        "seed": seed,
        "counts": counts,
        "sample_ids": [r.record_id for r in sampled],
    }
    return sampled, manifest
