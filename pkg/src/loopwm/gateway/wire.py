"""Wire schemas: JSON shapes for plan and critic exchanges.

Responses are parsed whole or rejected whole; nothing downstream ever sees
a half-validated message. Plan steps carry their instruction under
"action instruction" with "text" accepted as an alias, and pre/post
literals accept three spellings, resolved against the domain:

  canonical   "jar.closed", "not jar.closed"
  spelled out "jar closed", "not jar closed"
  bare suffix "lid removed"  (only when no two predicates share the suffix)

Critic scores arrive per dimension as {score, reason}, with
object_interaction and goal_achievement allowed to carry per_action /
per_event arrays instead of a flat score (the array scores are averaged).
The wire name visual_physics_realism maps to the internal
physical_realism dimension. Scores are clamped into [0, 1] with a warning
tag, and the scalar is always recomputed locally from the configured
weights; a scalar on the wire is ignored.
"""

from __future__ import annotations

import math

from ..critic import DEFAULT_TAU, DEFAULT_WEIGHTS, CriticReport, CriticWeights, aggregate
from ..errors import WireError
from ..microworld import DomainSpec
from ..microworld.types import ActionBinding, Literal
from ..planner import Goal, PlanSequence, PlanStep

INSTRUCTION_KEY = "action instruction"
INSTRUCTION_ALIAS = "text"

# wire dimension name -> internal dimension name
WIRE_DIMENSIONS = {
    "action_adherence": "action_adherence",
    "object_interaction": "object_interaction",
    "goal_achievement": "goal_achievement",
    "temporal_coherence": "temporal_coherence",
    "visual_physics_realism": "physical_realism",
}


def _phrase_tables(spec: DomainSpec) -> tuple[dict[str, str], dict[str, str]]:
    full = {}
    suffix: dict[str, str | None] = {}
    for pred, _ in spec.predicates:
        full[pred.replace(".", " ").replace("_", " ")] = pred
        tail = pred.split(".", 1)[1] if "." in pred else pred
        tail = tail.replace("_", " ")
        # a suffix shared by two predicates is ambiguous and unusable
        suffix[tail] = None if tail in suffix else pred
    return full, {k: v for k, v in suffix.items() if v is not None}


def parse_wire_literal(spec: DomainSpec, text: str) -> Literal:
    if not isinstance(text, str) or not text.strip():
        raise WireError(f"literal must be a non-empty string, got {text!r}")
    raw = " ".join(text.split())
    value = True
    if raw.startswith("not "):
        value = False
        raw = raw[4:].strip()
    known = {pred for pred, _ in spec.predicates}
    if raw in known:
        return Literal(raw, value)
    full, suffix = _phrase_tables(spec)
    if raw in full:
        return Literal(full[raw], value)
    if raw in suffix:
        return Literal(suffix[raw], value)
    raise WireError(f"literal {text!r} does not name a predicate of domain {spec.name!r}")


def _parse_literals(spec: DomainSpec, obj, where: str) -> tuple[Literal, ...]:
    if not isinstance(obj, list):
        raise WireError(f"{where} must be an array of literal strings")
    return tuple(parse_wire_literal(spec, item) for item in obj)


def _parse_actions(obj, where: str) -> tuple[ActionBinding, ...]:
    if not isinstance(obj, list) or not obj:
        raise WireError(f"{where} must be a non-empty array of action objects")
    bindings = []
    for i, entry in enumerate(obj):
        if not isinstance(entry, dict):
            raise WireError(f"{where}[{i}] must be an object")
        verb = entry.get("verb")
        objects = entry.get("objects")
        if not isinstance(verb, str) or not verb:
            raise WireError(f"{where}[{i}].verb must be a non-empty string")
        if not isinstance(objects, list) or not all(isinstance(o, str) for o in objects):
            raise WireError(f"{where}[{i}].objects must be an array of strings")
        tool = entry.get("tool")
        if tool is not None and not isinstance(tool, str):
            raise WireError(f"{where}[{i}].tool must be a string or null")
        bindings.append(ActionBinding(verb, tuple(objects), tool or None))
    return tuple(bindings)


def parse_wire_step(spec: DomainSpec, obj, index: int) -> PlanStep:
    where = f"steps[{index}]"
    if not isinstance(obj, dict):
        raise WireError(f"{where} must be an object")
    sid = obj.get("sid")
    if isinstance(sid, bool) or not isinstance(sid, int):
        raise WireError(f"{where}.sid must be an integer")
    instruction = obj.get(INSTRUCTION_KEY, obj.get(INSTRUCTION_ALIAS))
    if not isinstance(instruction, str) or not instruction.strip():
        raise WireError(
            f"{where} needs {INSTRUCTION_KEY!r} (or {INSTRUCTION_ALIAS!r}) as a non-empty string"
        )
    actions = _parse_actions(obj.get("actions"), f"{where}.actions")
    pre = _parse_literals(spec, obj.get("pre", []), f"{where}.pre")
    post = _parse_literals(spec, obj.get("post", []), f"{where}.post")
    try:
        return PlanStep(sid, instruction.strip(), actions, pre, post)
    except ValueError as exc:
        raise WireError(f"{where}: {exc}") from exc


def parse_plan_response(spec: DomainSpec, payload: dict, goal: Goal) -> PlanSequence:
    steps_obj = payload.get("steps")
    if not isinstance(steps_obj, list) or not steps_obj:
        raise WireError('plan response must carry a non-empty "steps" array')
    steps = tuple(parse_wire_step(spec, obj, i) for i, obj in enumerate(steps_obj))
    try:
        return PlanSequence(steps, goal)
    except ValueError as exc:
        raise WireError(str(exc)) from exc


def encode_step(step: PlanStep) -> dict:
    return {
        "sid": step.sid,
        INSTRUCTION_KEY: step.instruction,
        "actions": [
            {"verb": b.verb, "objects": list(b.objects), "tool": b.tool}
            for b in step.actions
        ],
        "pre": [str(lit) for lit in step.pre],
        "post": [str(lit) for lit in step.post],
    }


def _wire_score(entry: dict, wire_name: str) -> float:
    value = entry.get("score")
    if value is None:
        rows = entry.get("per_action") if wire_name == "object_interaction" else None
        if rows is None and wire_name == "goal_achievement":
            rows = entry.get("per_event")
        if not isinstance(rows, list) or not rows:
            raise WireError(f"scores.{wire_name} needs a score or a per-item array")
        values = [row.get("score") for row in rows if isinstance(row, dict)]
        if len(values) != len(rows) or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in values
        ):
            raise WireError(f"scores.{wire_name} per-item entries need numeric scores")
        value = sum(float(v) for v in values) / len(values)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise WireError(f"scores.{wire_name}.score must be a number")
    value = float(value)
    if not math.isfinite(value):
        raise WireError(f"scores.{wire_name}.score must be finite")
    return value


def parse_critic_response(
    payload: dict,
    step: PlanStep,
    weights: CriticWeights = DEFAULT_WEIGHTS,
    tau: float = DEFAULT_TAU,
) -> CriticReport:
    """Parse, clamp, and locally re-aggregate a remote critic response."""
    scores_obj = payload.get("scores")
    if not isinstance(scores_obj, dict):
        raise WireError('critic response must carry a "scores" object')
    scores: dict[str, float] = {}
    reasons: dict[str, str] = {}
    tags: list[str] = []
    for wire_name, dim in WIRE_DIMENSIONS.items():
        entry = scores_obj.get(wire_name)
        if not isinstance(entry, dict):
            raise WireError(f"critic response is missing scores.{wire_name}")
        raw = _wire_score(entry, wire_name)
        clamped = min(max(raw, 0.0), 1.0)
        if clamped != raw:
            tags.append(f"clamped:{dim}")
        scores[dim] = clamped
        reason = entry.get("reason", "")
        reasons[dim] = reason if isinstance(reason, str) else ""
    scalar = aggregate(scores, weights)
    if scalar < tau:
        low = sorted(
            (d for d in scores if scores[d] < tau), key=lambda d: (scores[d], d)
        )
        tags.extend(f"low-score:{d}" for d in low)
    revised = payload.get("revised_instruction")
    if revised is not None and (not isinstance(revised, str) or not revised.strip()):
        raise WireError("revised_instruction must be a non-empty string when present")
    details = {
        "wire_scores": scores_obj,
        "per_action": scores_obj.get("object_interaction", {}).get("per_action", []),
        "per_event": scores_obj.get("goal_achievement", {}).get("per_event", []),
    }
    return CriticReport(
        scores=scores,
        reasons=reasons,
        tags=tuple(tags),
        revised_instruction=(revised or step.instruction).strip(),
        scalar=scalar,
        details=details,
    )
