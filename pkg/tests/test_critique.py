import pytest

from trajcritic.critique import (
    DirectionSuggestion,
    SpeedSuggestion,
    build,
    parse,
    render,
    suggest_direction,
    suggest_speed,
)
from trajcritic.errors import InconsistentReportError, InvalidInputError
from trajcritic.risk import aggregate

from conftest import make_actor, make_scene, make_traj, straight_route


def _report(pred, ctx):
    return aggregate(pred, ctx)


def test_benign_text_golden():
    ctx = make_scene()
    report = _report(ctx.expert, ctx)
    _, text = build(report, ctx.expert, ctx.expert)
    head = text.splitlines()[:10]
    assert head == [
        "Risk Analysis:",
        "Collision Risk: False",
        "Speed Risk: False",
        "Direction Risk: False",
        "Pedestrian Risk: False",
        "Stop Sign Risk: False",
        "Traffic Light Risk: False",
        "Action Suggestions:",
        "- Maintain speed at 5.0 m/s.",
        "- Maintain direction.",
    ]


def test_speed_suggestion_templates():
    assert SpeedSuggestion("reduce", 8.25, 5.0).text == \
        "Reduce speed from 8.2 m/s to 5.0 m/s."
    assert SpeedSuggestion("increase", 2.0, 4.0).text == \
        "Increase speed from 2.0 m/s to 4.0 m/s."
    assert SpeedSuggestion("maintain", 5.0, 5.0).text == "Maintain speed at 5.0 m/s."


def test_direction_suggestion_templates():
    assert DirectionSuggestion("adjust_left").text == "Adjust direction to the Left."
    assert DirectionSuggestion("adjust_right").text == "Adjust direction to the Right."
    assert DirectionSuggestion("maintain").text == "Maintain direction."
    assert DirectionSuggestion("yield_override", "Vehicle").text == \
        "Collision risk with Vehicle, proceed with caution and yield."


def test_suggest_speed_direction_of_correction():
    ctx = make_scene(expert=make_traj(v=4.0))
    fast = make_traj(v=8.0)
    s = suggest_speed(_report(fast, ctx), fast, ctx.expert)
    assert s.kind == "reduce" and s.v_to == pytest.approx(4.0)
    slow = make_traj(v=1.0)
    s = suggest_speed(_report(slow, ctx), slow, ctx.expert)
    assert s.kind == "increase"


def test_suggest_direction_inverse_of_offset():
    ctx = make_scene()
    left = make_traj(route=straight_route(y=2.5))
    assert suggest_direction(_report(left, ctx)).kind == "adjust_right"
    right = make_traj(route=straight_route(y=-2.5))
    assert suggest_direction(_report(right, ctx)).kind == "adjust_left"


def test_collision_overrides_direction():
    ctx = make_scene(actors=[make_actor(6.0, 0.0)])
    report = _report(make_traj(v=5.0), ctx)
    assert report.collision is True
    d = suggest_direction(report)
    assert d.kind == "yield_override" and d.target_class == "Vehicle"


def test_inconsistent_report_raises():
    ctx = make_scene(actors=[make_actor(6.0, 0.0)])
    report = _report(make_traj(v=5.0), ctx)
    broken = type(report)(**{**report.__dict__, "evidence": {}})
    with pytest.raises(InconsistentReportError):
        suggest_direction(broken)


def test_render_byte_stable():
    ctx = make_scene(actors=[make_actor(6.0, 0.0)])
    report = _report(make_traj(v=8.0), ctx)
    _, t1 = build(report, make_traj(v=8.0), ctx.expert)
    _, t2 = build(report, make_traj(v=8.0), ctx.expert)
    assert t1 == t2


def test_parse_round_trip():
    ctx = make_scene(actors=[make_actor(6.0, 0.0)],
                     stop_sign_active=True, traffic_light="red")
    pred = make_traj(route=straight_route(y=2.5), v=8.0)
    critique, text = build(_report(pred, ctx), pred, ctx.expert)
    back = parse(text)
    assert back.flags == critique.flags
    assert back.speed_suggestion == critique.speed_suggestion
    assert back.direction_suggestion == critique.direction_suggestion
    assert back.detail == critique.detail


def test_parse_rejects_malformed():
    with pytest.raises(InvalidInputError):
        parse("hello world\n")
    ctx = make_scene()
    _, text = build(_report(ctx.expert, ctx), ctx.expert, ctx.expert)
    with pytest.raises(InvalidInputError):
        parse(text.replace("Collision Risk: False\n", ""))
    with pytest.raises(InvalidInputError):
        parse(text.replace("Maintain direction.", "Drive carefully."))
