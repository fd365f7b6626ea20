"""Closed-loop episode driver: plan, generate, critique, refine, replan.

Control flow per step: generate a segment, score it, accept into memory at
scalar >= tau. A rejection triggers the inner loop (revised instruction and
fresh noise, up to k_retries). Inner exhaustion triggers the outer loop:
replan from the simulated state, at most max_outer_replans times per
episode. Accepted history is never revisited.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..critic import CriticReport, evaluate, tag_dimension
from ..errors import LoopwmError, NoPlanError
from ..memory import WorldMemory
from ..microworld import DomainSpec, Segment, state_summary
from ..numerics import RandomSource
from ..planner import (
    RETRY_SAME_TAG,
    FailureContext,
    Goal,
    PlanSequence,
    PlanStep,
    plan,
    replan,
)
from .policies import Policy

STATUS_SUCCESS = "success"
STATUS_PLAN_FAILURE = "plan-failure"
STATUS_BUDGET = "budget-exhausted"

# a failing attempt must clear this fraction of tau before its report is
# considered informative enough to seed replanning feedback
SOFT_FLOOR_FRACTION = 0.5


@dataclass(frozen=True)
class LoopConfig:
    tau: float = 0.7
    k_retries: int = 3
    max_outer_replans: int = 2
    max_total_segments: int = 64

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise LoopwmError(f"tau must lie in (0, 1), got {self.tau}")
        if self.k_retries < 0 or self.max_outer_replans < 0:
            raise LoopwmError("retry and replan budgets must be >= 0")
        if self.max_total_segments < 1:
            raise LoopwmError("max_total_segments must be >= 1")


@dataclass(frozen=True)
class AttemptRecord:
    sid: int
    attempt: int  # 0 = first generation, 1..k = inner retries
    instruction: str
    report: CriticReport
    accepted: bool


@dataclass(frozen=True)
class ReplanEvent:
    at_sid: int
    tags: tuple[str, ...]
    outcome: str  # "replanned" | "no-plan"
    new_length: int


@dataclass
class EpisodeLog:
    goal: Goal
    status: str = "in-progress"
    attempts: list[AttemptRecord] = field(default_factory=list)
    replans: list[ReplanEvent] = field(default_factory=list)
    segments_generated: int = 0
    wall_seconds: float = 0.0
    # length of the plan in force at episode end (replans update it)
    plan_length: int = 0
    accepted_steps: int = 0
    final_state_text: str = ""

    @property
    def succeeded(self) -> bool:
        return self.status == STATUS_SUCCESS

    def to_dict(self) -> dict:
        return {
            "goal": self.goal.text,
            "goal_literals": [str(lit) for lit in self.goal.literals],
            "status": self.status,
            "plan_length": self.plan_length,
            "accepted_steps": self.accepted_steps,
            "segments_generated": self.segments_generated,
            "wall_seconds": round(self.wall_seconds, 6),
            "attempts": [
                {
                    "sid": a.sid,
                    "attempt": a.attempt,
                    "instruction": a.instruction,
                    "accepted": a.accepted,
                    "scalar": round(a.report.scalar, 6),
                    "tags": list(a.report.tags),
                    "scores": {k: round(v, 6) for k, v in a.report.scores.items()},
                }
                for a in self.attempts
            ],
            "replans": [
                {
                    "at_sid": r.at_sid,
                    "tags": list(r.tags),
                    "outcome": r.outcome,
                    "new_length": r.new_length,
                }
                for r in self.replans
            ],
            "final_state": self.final_state_text,
        }


def write_episode_logs(path: str | Path, logs: list[EpisodeLog]) -> None:
    """Line-delimited JSON, one episode per line."""
    with open(path, "w") as fh:
        for log in logs:
            fh.write(json.dumps(log.to_dict(), sort_keys=True) + "\n")


class SearchPlanner:
    """Default planner adapter over the breadth-first search module."""

    def __init__(self, node_budget: int | None = None):
        self.node_budget = node_budget

    def _kwargs(self):
        return {} if self.node_budget is None else {"node_budget": self.node_budget}

    def plan(self, spec: DomainSpec, goal: Goal, state) -> PlanSequence:
        return plan(spec, goal, state, **self._kwargs())

    def replan(self, spec: DomainSpec, goal: Goal, failure: FailureContext) -> PlanSequence:
        return replan(spec, goal, failure, **self._kwargs())


def default_critic(config: LoopConfig):
    def critic(spec: DomainSpec, segment: Segment, step: PlanStep) -> CriticReport:
        return evaluate(spec, segment, step, tau=config.tau)
    return critic


def inner_refine(spec: DomainSpec, step: PlanStep, report: CriticReport, policy: Policy,
                 critic, memory: WorldMemory, config: LoopConfig, rng: RandomSource,
                 budget: int) -> tuple[Segment | None, CriticReport, list[AttemptRecord]]:
    """Retry a rejected step with revised instructions and fresh noise.

    Returns (accepted segment or None, best report seen, attempt records).
    ``budget`` already accounts for both k_retries and the episode's segment
    budget; zero means fail immediately without generating.
    """
    best = report
    records: list[AttemptRecord] = []
    current = report
    for attempt in range(1, budget + 1):
        retry_step = step
        if current.revised_instruction != step.instruction:
            retry_step = step.with_instruction(current.revised_instruction)
        segment = policy.generate(retry_step, memory, rng)
        current = critic(spec, segment, retry_step)
        accepted = current.scalar >= config.tau
        records.append(AttemptRecord(step.sid, attempt, retry_step.instruction,
                                     current, accepted))
        if current.scalar > best.scalar:
            best = current
        if accepted:
            return segment, current, records
    return None, best, records


def _failure_context(goal: Goal, step: PlanStep, best: CriticReport,
                     remaining: tuple[PlanStep, ...], memory: WorldMemory,
                     config: LoopConfig) -> FailureContext:
    tags = list(best.tags)
    if memory.state.satisfies(step.pre) and RETRY_SAME_TAG not in tags:
        # the step is still symbolically valid, so the failure was generative;
        # allow the planner to hand the same plan back for a fresh-noise pass
        tags.append(RETRY_SAME_TAG)
    if best.scalar >= SOFT_FLOOR_FRACTION * config.tau:
        parts = [f"step {step.sid} peaked at {best.scalar:.2f} below tau={config.tau}"]
        for tag in best.tags[:2]:
            reason = best.reasons.get(tag_dimension(tag))
            if reason:
                parts.append(reason)
        feedback = "; ".join(parts)
    else:
        feedback = (f"step {step.sid} never came close (best {best.scalar:.2f}); "
                    "the attempt may be infeasible from the current state")
    return FailureContext(goal=goal, failed_step=step, tags=tuple(tags),
                          feedback_text=feedback, remaining=remaining,
                          state=memory.state.copy())


def run_episode(spec: DomainSpec, goal: Goal, policy: Policy,
                config: LoopConfig | None = None, rng: RandomSource | None = None,
                planner=None, critic=None) -> EpisodeLog:
    """Drive one closed-loop episode to success, plan failure, or budget end.

    An unsolvable goal raises NoPlanError up front; a failed replan mid-episode
    is recorded as a replan event and ends the episode as a plan failure.
    """
    config = config or LoopConfig()
    rng = rng or RandomSource(0)
    planner = planner or SearchPlanner()
    critic = critic or default_critic(config)

    t0 = time.monotonic()
    sequence = planner.plan(spec, goal, spec.initial_state())
    memory = WorldMemory.fresh(spec)
    log = EpisodeLog(goal=goal, plan_length=len(sequence.steps))

    steps = list(sequence.steps)
    i = 0
    replans_used = 0
    status = None
    while status is None:
        if i >= len(steps):
            status = STATUS_SUCCESS if memory.state.satisfies(goal.literals) \
                else STATUS_PLAN_FAILURE
            break
        step = steps[i]
        if log.segments_generated >= config.max_total_segments:
            status = STATUS_BUDGET
            break
        segment = policy.generate(step, memory, rng)
        log.segments_generated += 1
        report = critic(spec, segment, step)
        accepted = report.scalar >= config.tau
        log.attempts.append(AttemptRecord(step.sid, 0, step.instruction, report, accepted))
        if accepted:
            memory.advance(step, segment, report.scalar)
            log.accepted_steps += 1
            i += 1
            continue

        budget = min(config.k_retries,
                     config.max_total_segments - log.segments_generated)
        refined, best, records = inner_refine(spec, step, report, policy, critic,
                                              memory, config, rng, budget)
        log.segments_generated += len(records)
        log.attempts.extend(records)
        if refined is not None:
            memory.advance(step, refined, records[-1].report.scalar)
            log.accepted_steps += 1
            i += 1
            continue
        if budget < config.k_retries:
            status = STATUS_BUDGET
            break

        if replans_used >= config.max_outer_replans:
            status = STATUS_PLAN_FAILURE
            break
        failure = _failure_context(goal, step, best, tuple(steps[i + 1:]), memory, config)
        replans_used += 1
        try:
            new_sequence = planner.replan(spec, goal, failure)
        except NoPlanError:
            log.replans.append(ReplanEvent(step.sid, failure.tags, "no-plan", 0))
            status = STATUS_PLAN_FAILURE
            break
        log.replans.append(ReplanEvent(step.sid, failure.tags, "replanned",
                                       len(new_sequence.steps)))
        steps = steps[:i] + list(new_sequence.steps)
        # keep plan_length honest: it reports the plan in force at episode end
        log.plan_length = len(steps)

    log.status = status
    log.wall_seconds = time.monotonic() - t0
    log.final_state_text = state_summary(spec, memory.state)
    return log


def memory_update(memory: WorldMemory, step: PlanStep, segment: Segment,
                  report: CriticReport, tau: float = 0.7) -> WorldMemory:
    """Acceptance-gated advancement; rejecting callers that ignore tau."""
    if report.scalar < tau:
        raise LoopwmError(
            f"memory_update called with scalar {report.scalar:.3f} < tau {tau}")
    memory.advance(step, segment, report.scalar)
    return memory
