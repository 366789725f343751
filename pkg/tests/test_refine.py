import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trajcritic.errors import InvalidInputError, UndefinedEstimateError
from trajcritic.perturb import forced_collision, scale_speed, synthesize_batch
from trajcritic.refine import (
    CriticConfig,
    c_beta,
    estimate_beta,
    estimate_lipschitz,
    histogram_report,
    iterate_refinement,
    oracle_critic,
    q_value,
    theorem1_audit,
    theorem1_bound,
    theorem2_audit,
)
from trajcritic.traj import trajectories_equal

from conftest import make_actor, make_scene, make_traj, straight_route

CFG = CriticConfig()


def test_q_value_grid():
    ctx = make_scene()
    assert q_value(ctx.expert, ctx) == 1.0
    fast = scale_speed(ctx.expert, 1.4)
    assert q_value(fast, ctx) == pytest.approx(5 / 6)
    crash = make_scene(actors=[make_actor(8.0, 0.0)])
    rough = forced_collision(crash.expert, crash, "a0", 1.25)
    assert q_value(rough, crash) < 1.0


def test_critic_noop_on_risk_free():
    ctx = make_scene()
    _, _, a1 = oracle_critic(ctx.expert, ctx)
    assert a1 is ctx.expert  # exact no-op, same object


def test_critic_improves_speed_risk():
    ctx = make_scene()
    rough = scale_speed(ctx.expert, 1.4)
    critique, text, a1 = oracle_critic(rough, ctx)
    assert critique.flags["speed"] is True
    assert "Reduce speed" in text
    assert q_value(a1, ctx) > q_value(rough, ctx)


def test_critic_improves_forced_collision():
    # Crossing actor: the collision course is risky but the expert is clean.
    ctx = make_scene(actors=[make_actor(8.0, 0.0, vy=3.0)])
    rough = forced_collision(ctx.expert, ctx, "a0", 0.75)
    _, _, a1 = oracle_critic(rough, ctx)
    assert q_value(a1, ctx) > q_value(rough, ctx)


def test_critic_stands_pat_when_nothing_helps():
    # Stationary actor dead ahead: even the expert collides, so the guarded
    # critic returns the input unchanged rather than a worse action.
    ctx = make_scene(actors=[make_actor(8.0, 0.0)])
    rough = forced_collision(ctx.expert, ctx, "a0", 1.25)
    assert q_value(ctx.expert, ctx) == q_value(rough, ctx)
    _, _, a1 = oracle_critic(rough, ctx)
    assert a1 is rough


@given(st.sampled_from(["increase", "reduce"]), st.integers(0, 10 ** 6))
@settings(max_examples=40, deadline=None)
def test_critic_monotone_property(direction, seed):
    rng = np.random.default_rng(seed)
    gamma = rng.uniform(1.1, 1.5) if direction == "increase" else rng.uniform(0.3, 0.9)
    ctx = make_scene(actors=[make_actor(12.0, rng.uniform(-4, 4))])
    rough = scale_speed(ctx.expert, gamma)
    _, _, a1 = oracle_critic(rough, ctx)
    assert q_value(a1, ctx) >= q_value(rough, ctx)


def test_estimate_beta_and_undefined():
    ctx = make_scene()
    corpus = [(scale_speed(ctx.expert, g), ctx) for g in (1.3, 1.5, 0.5)]
    est = estimate_beta(corpus)
    assert 0.0 < est.beta_hat <= 1.0
    assert len(est.beta_samples) == 3
    with pytest.raises(UndefinedEstimateError):
        estimate_beta([(ctx.expert, ctx)])  # already at the maximum value


def test_estimate_lipschitz_ratios():
    ctx = make_scene()
    a = scale_speed(ctx.expert, 1.3)
    b = scale_speed(ctx.expert, 1.45)
    est = estimate_lipschitz([(a, b, ctx)])
    assert len(est.l_q_samples) == 1 and len(est.l_c_samples) == 1
    assert est.l_q_samples[0] >= 0.0
    with pytest.raises(InvalidInputError):
        estimate_lipschitz([(a, a, ctx)])


def test_histogram_report_shape():
    rep = histogram_report([0.1, 0.2, 0.2, 0.9], bins=4)
    assert rep["count"] == 4
    assert sum(rep["bin_counts"]) == 4
    assert len(rep["bin_edges"]) == 5


def test_theorem1_bound_oracle_and_validation():
    # beta=0.5, Q0=0.5, rho0=0.1, L_Q=1, L_C=1: 0.5 + 0.25 - 0.1*1*1.5 = 0.6
    assert theorem1_bound(0.5, 1.0, 0.5, 0.1, 1.0, 1.0) == pytest.approx(0.6)
    assert theorem1_bound(0.5, 1.0, 0.5, 0.0, 1.0, 1.0) == pytest.approx(0.75)
    with pytest.raises(InvalidInputError):
        theorem1_bound(0.5, 1.0, 0.0, 0.0, 1.0, 1.0)
    with pytest.raises(InvalidInputError):
        theorem1_bound(0.5, 1.0, 0.5, -0.1, 1.0, 1.0)


def test_c_beta_oracle_and_validation():
    assert c_beta(0.5, 2.0, 1.0) == pytest.approx(0.5 / (2.0 * 1.5))
    with pytest.raises(InvalidInputError):
        c_beta(1.0, 1.0, 1.0)
    with pytest.raises(InvalidInputError):
        c_beta(0.5, 0.0, 1.0)


def test_iterate_refinement_reaches_fixed_point():
    ctx = make_scene()
    rough = scale_speed(ctx.expert, 1.4)
    trace = iterate_refinement(rough, ctx, [ctx.expert], CriticConfig(max_iterations=5))
    assert trace.q_values[0] < 1.0
    assert trace.q_values[-1] == 1.0
    assert all(trace.monotone)
    # Non-increasing distance to the reference set along the trace
    assert all(r2 <= r1 + 1e-9 for r1, r2 in zip(trace.rho_values, trace.rho_values[1:]))
    # Once risk-free the critic stands pat, so the trace stops early
    assert len(trace.actions) <= 3


def test_iterate_refinement_validation():
    ctx = make_scene()
    with pytest.raises(InvalidInputError):
        iterate_refinement(ctx.expert, ctx, [])
    with pytest.raises(InvalidInputError):
        iterate_refinement(ctx.expert, ctx, [ctx.expert], CriticConfig(max_iterations=0))


def test_theorem1_audit_small_corpus(suite_scenes):
    records, _ = synthesize_batch(suite_scenes, 60, seed=11)
    scenes = {s.scene_id: s for s in suite_scenes}
    corpus = [(r.rough, scenes[r.scene_id]) for r in records]
    audit = theorem1_audit(corpus)
    assert audit["samples"] == 60
    assert audit["premises_hold"] is True
    assert audit["violations"] == 0
    assert audit["rho0"] == 0.0


def test_theorem1_audit_undefined_beta():
    ctx = make_scene()
    with pytest.raises(UndefinedEstimateError):
        theorem1_audit([(ctx.expert, ctx)])


def test_theorem2_audit_small_corpus(suite_scenes):
    records, _ = synthesize_batch(suite_scenes, 60, seed=12)
    scenes = {s.scene_id: s for s in suite_scenes}
    corpus = [(r.rough, scenes[r.scene_id]) for r in records]
    audit = theorem2_audit(corpus)
    assert 0.0 < audit["beta"] < 1.0
    assert audit["l_q"] > 0 and audit["l_c"] > 0
    assert audit["c_beta"] == pytest.approx(
        audit["beta"] / (audit["l_q"] * (1 - audit["beta"] + audit["l_c"])))
    assert audit["counterexamples"] == 0
    assert audit["condition_steps"] <= audit["realized_steps"]
