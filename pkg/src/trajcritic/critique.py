"""Render a risk report into a structured critique: six True/False risk lines,
corrective action suggestions, and a quantitative detail log.

The text template is frozen (see TEMPLATE_VERSION); rendering is byte-stable
for identical inputs and `parse` recovers the structured fields from the text.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import InconsistentReportError, InvalidInputError
from .risk import FLAG_NAMES, RiskReport
from .traj import Trajectory, speed_profile

TEMPLATE_VERSION = "1"

FLAG_LABELS = {
    "collision": "Collision Risk",
    "speed": "Speed Risk",
    "direction": "Direction Risk",
    "pedestrian": "Pedestrian Risk",
    "stop_sign": "Stop Sign Risk",
    "traffic_light": "Traffic Light Risk",
}

ACTOR_CLASS_LABELS = {"vehicle": "Vehicle", "pedestrian": "Pedestrian", "static": "Obstacle"}


@dataclass(frozen=True)
class SpeedSuggestion:
    kind: str  # reduce | increase | maintain
    v_from: float
    v_to: float

    @property
    def text(self) -> str:
        if self.kind == "reduce":
            return f"Reduce speed from {self.v_from:.1f} m/s to {self.v_to:.1f} m/s."
        if self.kind == "increase":
            return f"Increase speed from {self.v_from:.1f} m/s to {self.v_to:.1f} m/s."
        return f"Maintain speed at {self.v_from:.1f} m/s."


@dataclass(frozen=True)
class DirectionSuggestion:
    kind: str  # adjust_left | adjust_right | maintain | yield_override
    target_class: str | None = None

    @property
    def text(self) -> str:
        if self.kind == "yield_override":
            return f"Collision risk with {self.target_class}, proceed with caution and yield."
        if self.kind == "adjust_left":
            return "Adjust direction to the Left."
        if self.kind == "adjust_right":
            return "Adjust direction to the Right."
        return "Maintain direction."


@dataclass(frozen=True)
class Critique:
    flags: dict
    speed_suggestion: SpeedSuggestion
    direction_suggestion: DirectionSuggestion
    detail: dict = field(default_factory=dict)


def suggest_speed(report: RiskReport, pred: Trajectory, expert: Trajectory) -> SpeedSuggestion:
    """Corrective longitudinal action from the final-frame speeds."""
    v_pred = float(speed_profile(pred.speed)[-1])
    v_gt = float(speed_profile(expert.speed)[-1])
    if report.speed:
        if v_pred > v_gt:
            return SpeedSuggestion("reduce", v_pred, v_gt)
        if v_pred < v_gt:
            return SpeedSuggestion("increase", v_pred, v_gt)
        return SpeedSuggestion("maintain", v_pred, v_pred)
    return SpeedSuggestion("maintain", v_pred, v_pred)


def suggest_direction(report: RiskReport) -> DirectionSuggestion:
    """Corrective lateral action; a collision flag overrides with a yield directive."""
    if report.collision:
        first = report.evidence.get("collision", {}).get("first_collision")
        if not first:
            raise InconsistentReportError("collision flag set but no actor evidence")
        label = ACTOR_CLASS_LABELS.get(first["actor_class"], first["actor_class"].capitalize())
        return DirectionSuggestion("yield_override", label)
    if report.direction:
        side = report.evidence.get("lateral", {}).get("offset_side", "Left")
        # Suggest the inverse maneuver of the observed offset
        return DirectionSuggestion("adjust_right" if side == "Left" else "adjust_left")
    return DirectionSuggestion("maintain")


def _flatten_detail(evidence: dict) -> dict:
    out = {}
    for section, values in sorted(evidence.items()):
        if not isinstance(values, dict):
            out[section] = values
            continue
        for key, val in sorted(values.items()):
            if isinstance(val, dict):
                for k2, v2 in sorted(val.items()):
                    out[f"{section}.{key}.{k2}"] = v2
            else:
                out[f"{section}.{key}"] = val
    return out


def _json_safe(v):
    if isinstance(v, (np.floating,)):
        v = float(v)
    if isinstance(v, (np.integer,)):
        v = int(v)
    if isinstance(v, float) and (v != v or v in (float("inf"), float("-inf"))):
        return repr(v)
    return v


def render(report: RiskReport,
           speed_suggestion: SpeedSuggestion,
           direction_suggestion: DirectionSuggestion) -> tuple:
    """Emit the (Critique, canonical text block) pair. Byte-stable."""
    detail = {k: _json_safe(v) for k, v in _flatten_detail(report.evidence).items()}
    critique = Critique(report.flags(), speed_suggestion, direction_suggestion, detail)
    lines = ["Risk Analysis:"]
    for name in FLAG_NAMES:
        lines.append(f"{FLAG_LABELS[name]}: {critique.flags[name]}")
    lines.append("Action Suggestions:")
    lines.append(f"- {speed_suggestion.text}")
    lines.append(f"- {direction_suggestion.text}")
    lines.append("Detail:")
    for key, val in detail.items():
        lines.append(f"- {key}: {json.dumps(_json_safe(val))}")
    return critique, "\n".join(lines) + "\n"


def build(report: RiskReport, pred: Trajectory, expert: Trajectory) -> tuple:
    """Full pipeline: suggestions + render for a (report, pred, expert) triple."""
    return render(report, suggest_speed(report, pred, expert), suggest_direction(report))


_SPEED_RE = re.compile(
    r"(Reduce|Increase) speed from (-?\d+\.\d) m/s to (-?\d+\.\d) m/s\.")
_MAINTAIN_SPEED_RE = re.compile(r"Maintain speed at (-?\d+\.\d) m/s\.")
_YIELD_RE = re.compile(r"Collision risk with (.+), proceed with caution and yield\.")
_ADJUST_RE = re.compile(r"Adjust direction to the (Left|Right)\.")


def parse(text: str) -> Critique:
    """Parse a rendered critique back into its structured form.

    Speeds are recovered at the rendered one-decimal precision.
    """
    lines = text.splitlines()
    try:
        i_risk = lines.index("Risk Analysis:")
        i_act = lines.index("Action Suggestions:")
        i_det = lines.index("Detail:")
    except ValueError as e:
        raise InvalidInputError(f"malformed critique text: {e}") from e

    flags = {}
    for line in lines[i_risk + 1:i_act]:
        label, _, value = line.partition(": ")
        name = next((n for n, lab in FLAG_LABELS.items() if lab == label), None)
        if name is None or value not in ("True", "False"):
            raise InvalidInputError(f"malformed risk line: {line!r}")
        flags[name] = value == "True"
    if set(flags) != set(FLAG_NAMES):
        raise InvalidInputError("critique must list all six risk flags")

    actions = [line[2:] for line in lines[i_act + 1:i_det]]
    if len(actions) != 2:
        raise InvalidInputError("expected exactly two action suggestions")
    m = _SPEED_RE.fullmatch(actions[0])
    if m:
        kind = "reduce" if m.group(1) == "Reduce" else "increase"
        speed = SpeedSuggestion(kind, float(m.group(2)), float(m.group(3)))
    else:
        m = _MAINTAIN_SPEED_RE.fullmatch(actions[0])
        if not m:
            raise InvalidInputError(f"malformed speed suggestion: {actions[0]!r}")
        speed = SpeedSuggestion("maintain", float(m.group(1)), float(m.group(1)))
    m = _YIELD_RE.fullmatch(actions[1])
    if m:
        direction = DirectionSuggestion("yield_override", m.group(1))
    elif _ADJUST_RE.fullmatch(actions[1]):
        side = _ADJUST_RE.fullmatch(actions[1]).group(1)
        direction = DirectionSuggestion("adjust_left" if side == "Left" else "adjust_right")
    elif actions[1] == "Maintain direction.":
        direction = DirectionSuggestion("maintain")
    else:
        raise InvalidInputError(f"malformed direction suggestion: {actions[1]!r}")

    detail = {}
    for line in lines[i_det + 1:]:
        if not line:
            continue
        key, _, raw = line[2:].partition(": ")
        detail[key] = json.loads(raw)
    return Critique(flags, speed, direction, detail)
