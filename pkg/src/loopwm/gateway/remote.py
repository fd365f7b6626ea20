"""Remote planner and critic calls, interchangeable with the builtin ones.

A remote plan is never trusted as-is: it must pass symbolic validation
from the requesting state. On a failed validation the violation is
appended to the request and the endpoint gets exactly one chance to
correct itself; a second bad plan is an error. Critic responses likewise
only influence the loop after schema validation, clamping, and local
scalar recomputation.
"""

from __future__ import annotations

from ..critic import DEFAULT_TAU, DEFAULT_WEIGHTS, CriticWeights
from ..errors import DomainError, RemoteError
from ..microworld import DomainSpec, Segment, decode_frame, state_summary
from ..microworld.types import SymbolicState
from ..planner import FailureContext, Goal, PlanSequence, validate_plan
from .backend import RemoteClient
from .wire import encode_step, parse_critic_response, parse_plan_response

PLAN_ENDPOINT = "/plan"
REPLAN_ENDPOINT = "/replan"
CRITIC_ENDPOINT = "/critic"


def segment_summary(spec: DomainSpec, segment: Segment) -> str:
    """Text stand-in for the video payload: decoded start and end states."""
    first = state_summary(spec, decode_frame(spec, segment.frames[0]))
    final = state_summary(spec, decode_frame(spec, segment.frames[-1]))
    return f"start: {first} | end: {final} | frames: {segment.frames.shape[0]}"


def _describe_violation(spec: DomainSpec, sequence: PlanSequence,
                        state: SymbolicState) -> str | None:
    """None when the plan holds up; otherwise one sentence for the re-request."""
    try:
        report = validate_plan(spec, sequence, state)
    except DomainError as exc:
        return f"plan references an unknown action: {exc}"
    if report.first_violation is not None:
        sid, lit = report.first_violation
        return f"step {sid} requires '{lit.render()}' which does not hold at that point"
    if report.goal_satisfied is False:
        return "the plan completes without satisfying the goal"
    return None


def _request_plan(client: RemoteClient, spec: DomainSpec, goal: Goal,
                  state: SymbolicState, endpoint: str, payload: dict) -> PlanSequence:
    response = client.post(endpoint, payload)
    sequence = parse_plan_response(spec, response, goal)
    violation = _describe_violation(spec, sequence, state)
    if violation is None:
        return sequence
    retry_payload = dict(payload, violation=violation)
    response = client.post(endpoint, retry_payload)
    sequence = parse_plan_response(spec, response, goal)
    violation = _describe_violation(spec, sequence, state)
    if violation is None:
        return sequence
    raise RemoteError(f"{endpoint} produced an invalid plan twice; last problem: {violation}")


def remote_plan(client: RemoteClient, spec: DomainSpec, goal: Goal,
                state: SymbolicState) -> PlanSequence:
    payload = {
        "goal": goal.text,
        "state_summary": state_summary(spec, state),
    }
    return _request_plan(client, spec, goal, state, PLAN_ENDPOINT, payload)


def remote_replan(client: RemoteClient, spec: DomainSpec, goal: Goal,
                  failure: FailureContext) -> PlanSequence:
    payload = {
        "global_goal": goal.text,
        "failed_attempt": encode_step(failure.failed_step),
        "critic_feedback": failure.feedback_text,
        "remaining_steps": [encode_step(s) for s in failure.remaining],
        "state_summary": state_summary(spec, failure.state),
    }
    sequence = _request_plan(client, spec, goal, failure.state, REPLAN_ENDPOINT, payload)
    if sequence.steps[0].sid != failure.failed_step.sid:
        raise RemoteError(
            f"replan must resume at sid {failure.failed_step.sid}, "
            f"got {sequence.steps[0].sid}"
        )
    return sequence


def remote_critic(client: RemoteClient, spec: DomainSpec, segment: Segment, step,
                  goal_text: str = "", weights: CriticWeights = DEFAULT_WEIGHTS,
                  tau: float = DEFAULT_TAU):
    payload = {
        "global_goal": goal_text,
        "action_plan_list": [encode_step(step)],
        "segment_summary": segment_summary(spec, segment),
    }
    response = client.post(CRITIC_ENDPOINT, payload)
    return parse_critic_response(response, step, weights=weights, tau=tau)


class RemotePlanner:
    """Drop-in for SearchPlanner: same plan/replan surface, remote brain."""

    def __init__(self, client: RemoteClient):
        self.client = client

    def plan(self, spec: DomainSpec, goal: Goal, state: SymbolicState) -> PlanSequence:
        return remote_plan(self.client, spec, goal, state)

    def replan(self, spec: DomainSpec, goal: Goal, failure: FailureContext) -> PlanSequence:
        return remote_replan(self.client, spec, goal, failure)


def remote_critic_fn(client: RemoteClient, goal_text: str = "",
                     weights: CriticWeights = DEFAULT_WEIGHTS, tau: float = DEFAULT_TAU):
    """Callable with the loop engine's critic signature, backed by the wire."""

    def critic(spec: DomainSpec, segment: Segment, step):
        return remote_critic(client, spec, segment, step, goal_text=goal_text,
                             weights=weights, tau=tau)

    return critic
