import numpy as np
import pytest

from trajcritic.errors import InfeasibleError, InvalidInputError
from trajcritic.perturb import (
    DEFAULT_MIX,
    KINDS,
    PerturbationSpec,
    _kind_counts,
    forced_collision,
    is_dynamically_feasible,
    lane_deviation,
    scale_speed,
    shift_route,
    synthesize_batch,
)
from trajcritic.traj import speed_profile

from conftest import make_actor, make_scene, make_traj, straight_route


def test_spec_rejects_unknown_kind():
    with pytest.raises(InvalidInputError):
        PerturbationSpec("teleport")


def test_scale_speed_oracle():
    t = make_traj(v=4.0)
    out = scale_speed(t, 1.25)
    assert speed_profile(out.speed) == pytest.approx([5.0] * 9)
    # Route is untouched, bit for bit
    assert out.route.points is t.route.points or np.array_equal(
        out.route.points, t.route.points)
    assert np.array_equal(out.route.points, t.route.points)
    with pytest.raises(InvalidInputError):
        scale_speed(t, 0.0)


def test_scale_speed_preserves_start_point():
    t = make_traj(v=4.0)
    out = scale_speed(t, 0.5)
    assert np.array_equal(out.speed.points[0], t.speed.points[0])
    assert speed_profile(out.speed) == pytest.approx([2.0] * 9)


def test_shift_route_ramp_oracle():
    pts = straight_route(n=10)
    out = shift_route(pts, w=2.0, k_start=2, l_trans=4)
    # Left normal of +x travel is +y; ramp is linear over the window
    assert out[:, 1] == pytest.approx([0, 0, 0.5, 1.0, 1.5, 2.0, 2.0, 2.0, 2.0, 2.0])
    assert out[:, 0] == pytest.approx(pts[:, 0])


def test_shift_route_validation():
    pts = straight_route(n=10)
    with pytest.raises(InvalidInputError):
        shift_route(pts, 2.0, k_start=8, l_trans=4)
    with pytest.raises(InvalidInputError):
        shift_route(pts, 2.0, k_start=1, l_trans=0)


def test_lane_deviation_zero_width_identity():
    t = make_traj()
    assert lane_deviation(t, 0.0, 2, 5) is t


def test_lane_deviation_reaches_offset_and_is_feasible():
    ctx = make_scene()
    out = lane_deviation(ctx.expert, 2.0, 2, 12)
    assert abs(out.route.points[-1, 1] - 2.0) < 0.5
    assert is_dynamically_feasible(out, ctx)


def test_forced_collision_errors():
    ctx = make_scene(actors=[make_actor(10.0, 0.0)])
    with pytest.raises(InvalidInputError):
        forced_collision(ctx.expert, ctx, "ghost", 1.0)
    with pytest.raises(InvalidInputError):
        forced_collision(ctx.expert, ctx, "a0", -1.0)
    with pytest.raises(InvalidInputError):
        forced_collision(ctx.expert, ctx, "a0", 99.0)  # beyond the horizon
    near = make_scene(actors=[make_actor(0.5, 0.0)])
    with pytest.raises(InfeasibleError):
        forced_collision(near.expert, near, "a0", 2.0)  # already in the envelope
    far = make_scene(actors=[make_actor(40.0, 0.0)])
    with pytest.raises(InfeasibleError):
        forced_collision(far.expert, far, "a0", 0.5)  # needs > 30 m/s


def test_forced_collision_flags_collision():
    from trajcritic.risk import aggregate
    ctx = make_scene(actors=[make_actor(12.0, 0.0)])
    rough = forced_collision(ctx.expert, ctx, "a0", 1.5)
    assert aggregate(rough, ctx).collision is True


def test_kind_counts_exact():
    counts = _kind_counts(DEFAULT_MIX, 10000)
    assert sum(counts.values()) == 10000
    assert counts["increase_speed"] == 3688
    assert counts["reduce_speed"] == 3718
    assert counts["lane_change"] == 946
    assert counts["forced_collision"] == 1648
    with pytest.raises(InvalidInputError):
        _kind_counts({"increase_speed": 0.5}, 10)


def test_synthesize_batch_deterministic(suite_scenes):
    r1, m1 = synthesize_batch(suite_scenes, 40, seed=7)
    r2, m2 = synthesize_batch(suite_scenes, 40, seed=7)
    assert [r.record_id for r in r1] == [r.record_id for r in r2]
    assert [r.critique_text for r in r1] == [r.critique_text for r in r2]
    assert m1["kind_counts"] == m2["kind_counts"]
    r3, _ = synthesize_batch(suite_scenes, 40, seed=8)
    assert [r.provenance["params"] for r in r1] != [r.provenance["params"] for r in r3]


def test_synthesize_batch_records_are_consistent(suite_scenes):
    from trajcritic.critique import parse
    records, manifest = synthesize_batch(suite_scenes, 30, seed=3)
    assert manifest["emitted"] == 30
    for rec in records:
        assert rec.source == "EPAS"
        assert rec.provenance["kind"] in KINDS
        # Stored flags agree with the flags rendered into the critique text
        assert parse(rec.critique_text).flags == rec.flags
        assert rec.refined is not rec.rough
    # Risky kinds always trip at least one flag
    for rec in records:
        if rec.provenance["kind"] == "forced_collision":
            assert rec.flags["collision"] is True
