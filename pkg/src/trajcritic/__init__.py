"""Rule-based trajectory critique, perturbation synthesis, critic-guided
refinement, and a desk-scale closed-loop simulator.

Modules:
    geom      planar geometry: OBBs, SAT, bicycle kinematics, path deviation
    traj      dual (route, speed) waypoint trajectories and metrics
    risk      four-domain risk analyzers and the six-flag report
    critique  critique rendering / parsing and action suggestions
    perturb   expert-trajectory corruption and batch corpus synthesis
    refine    oracle critic, value function, bound audits
    control   dual-PID tracking controllers and brake logic
    sim       scripted-actor closed-loop episode and suite drivers
    scenarios the shipped 12-scenario desk suite
    sceneio   JSON/JSONL schemas, corpus records, dataset mixing
    cli       command-line entry point
"""

__version__ = "0.1.0"

from .traj import RouteWaypoints, SpeedWaypoints, Trajectory, traj_distance  # noqa: F401
from .risk import RiskReport, RiskThresholds, SceneContext, aggregate  # noqa: F401
from .critique import Critique, build, parse  # noqa: F401
from .refine import CriticConfig, iterate_refinement, oracle_critic, q_value  # noqa: F401
