"""Plan-side value types."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..microworld.types import ActionBinding, Literal, SymbolicState
from ..microworld.types import MAX_INSTRUCTION_WORDS


@dataclass(frozen=True)
class Goal:
    """Target predicate literals plus a free-form description."""

    literals: tuple[Literal, ...]
    text: str = ""

    def __post_init__(self) -> None:
        if not self.literals:
            raise ValueError("a goal needs at least one literal")
        if not self.text:
            object.__setattr__(self, "text", describe_literals(self.literals))


def describe_literals(literals: tuple[Literal, ...]) -> str:
    return "achieve " + " and ".join(lit.render() for lit in literals)


@dataclass(frozen=True)
class PlanStep:
    """One atomic step: an instruction, its action, and pre/post literals."""

    sid: int
    instruction: str
    actions: tuple[ActionBinding, ...]
    pre: tuple[Literal, ...]
    post: tuple[Literal, ...]

    def __post_init__(self) -> None:
        if self.sid < 1:
            raise ValueError(f"sid must be >= 1, got {self.sid}")
        if not self.actions:
            raise ValueError("a step needs at least one action")
        words = len(self.instruction.split())
        if words == 0 or words > MAX_INSTRUCTION_WORDS:
            raise ValueError(
                f"instruction must be 1..{MAX_INSTRUCTION_WORDS} words, got {words}"
            )

    def with_instruction(self, text: str) -> "PlanStep":
        return PlanStep(self.sid, text, self.actions, self.pre, self.post)


@dataclass(frozen=True)
class PlanSequence:
    steps: tuple[PlanStep, ...]
    goal: Goal

    def __post_init__(self) -> None:
        sids = [s.sid for s in self.steps]
        if any(b <= a for a, b in zip(sids, sids[1:])):
            raise ValueError(f"sids must be strictly increasing, got {sids}")

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)


@dataclass
class ValidationReport:
    ok: bool
    first_violation: tuple[int, Literal] | None
    goal_satisfied: bool | None
    final_state: SymbolicState


@dataclass
class FailureContext:
    """Everything the replanner gets to see after inner retries are exhausted."""

    goal: Goal
    failed_step: PlanStep
    tags: tuple[str, ...]
    feedback_text: str
    remaining: tuple[PlanStep, ...]
    state: SymbolicState
