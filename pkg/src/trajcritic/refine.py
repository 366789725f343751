"""Critique-driven trajectory refinement and executable checks of the two
refinement bounds.

The value of a trajectory is the proportion of untriggered risk flags (1.0 is
risk-free). The critic here is a deterministic suggestion-executor: it builds
the critique and then applies the suggested corrections by blending toward the
expert reference. It preserves the (rough action, scene) -> (critique, refined
action) interface and is a strict no-op on risk-free inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .critique import Critique, build
from .errors import InvalidInputError, UndefinedEstimateError
from .risk import FLAG_NAMES, RiskThresholds, SceneContext, aggregate
from .traj import RouteWaypoints, SpeedWaypoints, Trajectory, speed_profile, traj_distance

N_FLAGS = len(FLAG_NAMES)
Q_STAR = 1.0
FIXED_POINT_EPS = 1e-9


@dataclass(frozen=True)
class CriticConfig:
    step_eta: float = 0.5          # route blend factor toward the expert
    speed_blend: float = 0.7       # implied-speed blend factor toward the target
    collision_speed_cut: float = 0.5
    max_iterations: int = 3
    thresholds: RiskThresholds = RiskThresholds()

    def __post_init__(self):
        for name in ("step_eta", "speed_blend"):
            if not 0 < getattr(self, name) <= 1:
                raise InvalidInputError(f"{name} must be in (0, 1]")


def q_value(t: Trajectory, ctx: SceneContext,
            th: RiskThresholds = RiskThresholds()) -> float:
    """Proportion of untriggered risk flags, in {0, 1/6, ..., 1}."""
    report = aggregate(t, ctx, th)
    return (N_FLAGS - report.n_risks()) / N_FLAGS


def _rebuild_speed(points: np.ndarray, speeds: np.ndarray, dt: float) -> np.ndarray:
    """Reconstruct speed waypoints keeping each displacement direction but
    setting its magnitude from the given implied speeds."""
    disp = np.diff(points, axis=0)
    norms = np.linalg.norm(disp, axis=1)
    dirs = np.where(norms[:, None] > 1e-12, disp / np.where(norms[:, None] > 0, norms[:, None], 1.0),
                    np.array([1.0, 0.0]))
    out = np.empty_like(points)
    out[0] = points[0]
    for i, v in enumerate(speeds):
        out[i + 1] = out[i] + dirs[i] * v * dt
    return out


def oracle_critic(a0: Trajectory, ctx: SceneContext,
                  cfg: CriticConfig = CriticConfig()):
    """Critique a0 and deterministically apply the suggestions.

    Returns (critique, text, refined trajectory). Risk-free inputs are returned
    unchanged.
    """
    if ctx.expert is None:
        raise InvalidInputError("oracle critic needs an expert reference in the scene")
    report = aggregate(a0, ctx, cfg.thresholds)
    critique, text = build(report, a0, ctx.expert)
    if report.n_risks() == 0:
        return critique, text, a0

    expert = ctx.expert
    route = a0.route.points.copy()
    if critique.direction_suggestion.kind != "maintain" and len(expert.route) == len(a0.route):
        route = (1.0 - cfg.step_eta) * route + cfg.step_eta * expert.route.points

    speeds = speed_profile(a0.speed)
    changed_speed = False
    if report.collision:
        speeds = speeds * cfg.collision_speed_cut
        changed_speed = True
    if critique.speed_suggestion.kind in ("reduce", "increase") or report.speed:
        v_to = critique.speed_suggestion.v_to
        speeds = speeds + cfg.speed_blend * (v_to - speeds)
        changed_speed = True

    if changed_speed:
        speed_pts = _rebuild_speed(a0.speed.points, speeds, a0.speed.dt)
    else:
        speed_pts = a0.speed.points
    a1 = Trajectory(RouteWaypoints(route), SpeedWaypoints(speed_pts, a0.speed.dt))

    # Guarded step: never emit a lower-value action. If executing the
    # suggestions alone does not raise the value, fall back to the expert
    # reference; if even that does not help, stand pat.
    q0 = (N_FLAGS - report.n_risks()) / N_FLAGS
    q1 = q_value(a1, ctx, cfg.thresholds)
    if q1 <= q0:
        q_exp = q_value(expert, ctx, cfg.thresholds)
        a1 = expert if q_exp > q0 else a0
    return critique, text, a1


@dataclass(frozen=True)
class AssumptionEstimates:
    beta_hat: float = math.nan
    beta_samples: tuple = ()
    l_q_samples: tuple = ()
    l_c_samples: tuple = ()
    q_star: float = Q_STAR

    def summary(self) -> dict:
        out = {"q_star": self.q_star}
        if self.beta_samples:
            out["beta_hat"] = self.beta_hat
            out["beta_min"] = min(self.beta_samples)
        for name, samples in (("l_q", self.l_q_samples), ("l_c", self.l_c_samples)):
            if samples:
                arr = np.asarray(samples)
                out[f"{name}_max"] = float(arr.max())
                out[f"{name}_mean"] = float(arr.mean())
                out[f"{name}_quantiles"] = {
                    q: float(np.quantile(arr, q)) for q in (0.5, 0.9, 0.99)
                }
        return out


def estimate_beta(corpus, cfg: CriticConfig = CriticConfig()) -> AssumptionEstimates:
    """Per-sample improvement ratio (Q(C(a)) - Q(a)) / (Q* - Q(a)) and its mean.

    Samples already at Q* are rejected; ratios are clamped to [0, 1] for the
    aggregate estimate, raw ratios are kept per sample.
    """
    ratios = []
    for a0, ctx in corpus:
        q0 = q_value(a0, ctx, cfg.thresholds)
        if q0 >= Q_STAR:
            continue
        _, _, a1 = oracle_critic(a0, ctx, cfg)
        q1 = q_value(a1, ctx, cfg.thresholds)
        ratios.append((q1 - q0) / (Q_STAR - q0))
    if not ratios:
        raise UndefinedEstimateError("no samples below Q*; beta is undefined")
    beta_hat = float(np.clip(np.mean(ratios), 0.0, 1.0))
    return AssumptionEstimates(beta_hat=beta_hat, beta_samples=tuple(ratios))


def estimate_lipschitz(pairs, cfg: CriticConfig = CriticConfig()) -> AssumptionEstimates:
    """Empirical Lipschitz ratios for the value function and the critic map.

    Each entry is (a, b, ctx) with d(a, b) > 0; yields |Q(a)-Q(b)|/d and
    d(C(a), C(b))/d per pair.
    """
    l_q, l_c = [], []
    q_cache, c_cache = {}, {}

    def q_of(a, ctx):
        key = id(a)
        if key not in q_cache:
            q_cache[key] = q_value(a, ctx, cfg.thresholds)
        return q_cache[key]

    def c_of(a, ctx):
        key = id(a)
        if key not in c_cache:
            c_cache[key] = oracle_critic(a, ctx, cfg)[2]
        return c_cache[key]

    pairs = list(pairs)  # keeps actions alive so id()-keyed caches stay valid
    for a, b, ctx in pairs:
        d = traj_distance(a, b)
        if d <= 0:
            raise InvalidInputError("zero-distance pair; Lipschitz ratio undefined")
        l_q.append(abs(q_of(a, ctx) - q_of(b, ctx)) / d)
        l_c.append(traj_distance(c_of(a, ctx), c_of(b, ctx)) / d)
    return AssumptionEstimates(l_q_samples=tuple(l_q), l_c_samples=tuple(l_c))


def histogram_report(samples, bins: int = 50) -> dict:
    """Histogram payload (edges + counts) for plotting assumption distributions."""
    arr = np.asarray(list(samples), dtype=float)
    counts, edges = np.histogram(arr, bins=bins)
    return {
        "count": int(arr.size),
        "min": float(arr.min()),
        "max": float(arr.max()),
        "mean": float(arr.mean()),
        "bin_edges": [float(e) for e in edges],
        "bin_counts": [int(c) for c in counts],
    }


def theorem1_bound(q_a0: float, q_star: float, beta: float,
                   rho0: float, l_q: float, l_c: float) -> float:
    """Lower bound on the refined value: beta*Q* + (1-beta)*Q(A0) - rho0*L_Q*(1-beta+L_C)."""
    if not 0 < beta < 1:
        raise InvalidInputError("beta must be in (0, 1)")
    if rho0 < 0 or l_q < 0 or l_c < 0:
        raise InvalidInputError("rho0, l_q, l_c must be nonnegative")
    return beta * q_star + (1.0 - beta) * q_a0 - rho0 * l_q * (1.0 - beta + l_c)


def c_beta(beta: float, l_q: float, l_c: float) -> float:
    """Monotonicity constant beta / (L_Q * (1 - beta + L_C))."""
    if not 0 < beta < 1:
        raise InvalidInputError("beta must be in (0, 1)")
    if l_q <= 0 or l_c <= 0:
        raise InvalidInputError("Lipschitz constants must be positive")
    return beta / (l_q * (1.0 - beta + l_c))


@dataclass(frozen=True)
class RefinementTrace:
    actions: tuple
    q_values: tuple
    rho_values: tuple
    bounds: tuple          # Theorem-1 lower bound on Q(A_{k+1}) from step k
    condition_holds: tuple  # Theorem-2 sufficient condition at step k
    monotone: tuple        # Q(A_{k+1}) >= Q(A_k) observed


def iterate_refinement(a0: Trajectory, ctx: SceneContext, reference_set,
                       cfg: CriticConfig = CriticConfig(),
                       beta: float = 0.1, l_q: float = 1.0, l_c: float = 1.0) -> RefinementTrace:
    """Apply the critic repeatedly, recording values, distances to the reference
    set, and the per-step bound/condition evaluations."""
    reference_set = list(reference_set)
    if not reference_set:
        raise InvalidInputError("reference set must be nonempty")
    if cfg.max_iterations < 1:
        raise InvalidInputError("max_iterations must be >= 1")

    def rho(a):
        return min(traj_distance(a, t) for t in reference_set)

    cb = c_beta(beta, l_q, l_c)
    actions = [a0]
    q_values = [q_value(a0, ctx, cfg.thresholds)]
    rho_values = [rho(a0)]
    bounds, condition_holds, monotone = [], [], []
    for _ in range(cfg.max_iterations):
        a_k = actions[-1]
        _, _, a_next = oracle_critic(a_k, ctx, cfg)
        bounds.append(theorem1_bound(q_values[-1], Q_STAR, beta, rho_values[-1], l_q, l_c))
        condition_holds.append(rho_values[-1] <= cb * (Q_STAR - q_values[-1]) + 1e-12)
        if traj_distance(a_next, a_k) < FIXED_POINT_EPS:
            break
        actions.append(a_next)
        q_values.append(q_value(a_next, ctx, cfg.thresholds))
        rho_values.append(rho(a_next))
        monotone.append(q_values[-1] >= q_values[-2])
    # bounds/condition_holds cover every attempted step, including one that
    # terminated at a fixed point; monotone covers realized steps only.
    return RefinementTrace(
        actions=tuple(actions),
        q_values=tuple(q_values),
        rho_values=tuple(rho_values),
        bounds=tuple(bounds),
        condition_holds=tuple(condition_holds),
        monotone=tuple(monotone),
    )


# ---------------------------------------------------------------------------
# Audits

def theorem1_audit(corpus, cfg: CriticConfig = CriticConfig(), tol: float = 1e-9) -> dict:
    """Audit the one-step lower bound over a (trajectory, scene) corpus.

    The corpus itself is the reference set, so every audited action sits at
    rho0 = 0, and beta is the worst-case (minimum) per-sample improvement
    ratio. A violation is a sample whose refined value falls below
    beta*Q* + (1-beta)*Q(A0) by more than the tolerance.
    """
    rows = []
    ratios = []
    for a0, ctx in corpus:
        q0 = q_value(a0, ctx, cfg.thresholds)
        _, _, a1 = oracle_critic(a0, ctx, cfg)
        q1 = q_value(a1, ctx, cfg.thresholds)
        rows.append((q0, q1))
        if q0 < Q_STAR:
            ratios.append((q1 - q0) / (Q_STAR - q0))
    if not ratios:
        raise UndefinedEstimateError("no samples below Q*; beta is undefined")
    beta = float(min(ratios))
    premises_hold = 0.0 < beta <= 1.0
    violations = sum(
        1 for q0, q1 in rows if q1 < beta * Q_STAR + (1.0 - beta) * q0 - tol
    )
    return {
        "samples": len(rows),
        "beta_worst_case": beta,
        "rho0": 0.0,
        "premises_hold": premises_hold,
        "violations": violations,
        "tolerance": tol,
    }


def _same_scene_pairs(corpus):
    """Same-scene (a, b, ctx) pairs with nonzero distance.

    Pairs each action with its next two same-scene neighbors, so a corpus of
    N actions yields close to 2N pairs.
    """
    by_scene = {}
    for a, ctx in corpus:
        by_scene.setdefault(ctx.scene_id, (ctx, []))[1].append(a)
    pairs = []
    for ctx, actions in by_scene.values():
        for offset in (1, 2):
            for a, b in zip(actions, actions[offset:]):
                if traj_distance(a, b) > 0:
                    pairs.append((a, b, ctx))
    return pairs


def theorem2_audit(corpus, cfg: CriticConfig = CriticConfig(),
                   max_refs_per_scene: int = 200) -> dict:
    """Audit the sufficient condition for monotone refinement across traces.

    Constants come from the corpus itself: beta from the mean improvement
    ratio, L_Q / L_C as worst-case ratios over same-scene pairs. A
    counterexample is a realized step where the recorded condition held but
    the value decreased.
    """
    corpus = list(corpus)
    beta_est = estimate_beta(corpus, cfg)
    beta = float(np.clip(beta_est.beta_hat, 1e-6, 1.0 - 1e-6))
    pairs = _same_scene_pairs(corpus)
    if not pairs:
        raise UndefinedEstimateError("no same-scene pairs; Lipschitz constants undefined")
    lip = estimate_lipschitz(pairs, cfg)
    l_q = max(max(lip.l_q_samples), 1e-9)
    l_c = max(max(lip.l_c_samples), 1e-9)

    by_scene = {}
    for a, ctx in corpus:
        by_scene.setdefault(ctx.scene_id, (ctx, []))[1].append(a)

    steps = 0
    condition_steps = 0
    counterexamples = 0
    for ctx, actions in by_scene.values():
        stride = max(1, len(actions) // max_refs_per_scene)
        refs = actions[::stride]
        for a0 in actions:
            trace = iterate_refinement(a0, ctx, refs, cfg, beta=beta, l_q=l_q, l_c=l_c)
            for held, mono in zip(trace.condition_holds, trace.monotone):
                steps += 1
                if held:
                    condition_steps += 1
                    if not mono:
                        counterexamples += 1
    return {
        "samples": len(corpus),
        "beta": beta,
        "l_q": l_q,
        "l_c": l_c,
        "c_beta": c_beta(beta, l_q, l_c),
        "realized_steps": steps,
        "condition_steps": condition_steps,
        "counterexamples": counterexamples,
    }
