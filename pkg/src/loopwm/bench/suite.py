"""Difficulty-stratified task suites, verified against the exhaustive oracle.

Difficulty is the minimal plan length from the task's start state: simple
tasks solve in 1-3 steps, medium in 3-5, hard in more than 5 (capped at the
oracle's search depth). The generator samples goals from random forward
walks, so every emitted task is reachable by construction, and every task's
band membership is re-checked with `minimal_plan_length` before it is kept.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import SuiteError
from ..microworld import DomainSpec, load_domain
from ..microworld.dynamics import apply_operator
from ..microworld.types import Literal, SymbolicState
from ..numerics import RandomSource
from ..planner import Goal
from .oracle import DEFAULT_MAX_LEN, minimal_plan_length

DIFFICULTIES = ("simple", "medium", "hard")

# acceptance bands (inclusive); "hard" means beyond 5 up to the oracle cap
BANDS = {
    "simple": (1, 3),
    "medium": (3, 5),
    "hard": (6, DEFAULT_MAX_LEN),
}

# generation targets are disjoint so a sampled goal lands in exactly one
# bucket; medium's lower edge moves off the shared boundary at 3
_TARGETS = {
    "simple": (1, 3),
    "medium": (4, 5),
    "hard": (6, DEFAULT_MAX_LEN),
}

DEFAULT_COUNTS = (20, 20, 10)

SUITE_FORMAT = "loopwm-suite-v1"

# sampling effort per requested task before the generator gives up on a level
_ATTEMPTS_PER_TASK = 500

_MAX_GOAL_LITERALS = 3


@dataclass(frozen=True)
class SuiteTask:
    """One benchmark task: a goal, where to start, and how deep it sits."""

    goal: Goal
    state: SymbolicState
    difficulty: str
    min_steps: int

    def key(self) -> tuple[str, ...]:
        """Dedup/hash identity: the sorted literal strings."""
        return tuple(sorted(str(lit) for lit in self.goal.literals))


@dataclass(frozen=True)
class PromptSuite:
    spec: DomainSpec
    tasks: tuple[SuiteTask, ...]
    _digest: str = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        payload = {
            "format": SUITE_FORMAT,
            "domain": self.spec.name,
            "tasks": [
                {"difficulty": t.difficulty, "literals": list(t.key()), "min_steps": t.min_steps}
                for t in self.tasks
            ],
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        object.__setattr__(self, "_digest", hashlib.sha256(blob).hexdigest())

    @property
    def domain(self) -> str:
        return self.spec.name

    @property
    def digest(self) -> str:
        return self._digest

    def counts(self) -> dict[str, int]:
        out = {d: 0 for d in DIFFICULTIES}
        for t in self.tasks:
            out[t.difficulty] += 1
        return out

    def __len__(self) -> int:
        return len(self.tasks)


def classify(min_steps: int | None) -> str | None:
    """Difficulty bucket for a minimal plan length, or None if out of range."""
    if min_steps is None:
        return None
    for name in DIFFICULTIES:
        lo, hi = _TARGETS[name]
        if lo <= min_steps <= hi:
            return name
    return None


def verify_suite(suite: PromptSuite) -> None:
    """Re-check every task's band with the exhaustive oracle."""
    for i, task in enumerate(suite.tasks):
        m = minimal_plan_length(suite.spec, task.state, task.goal.literals)
        lo, hi = BANDS[task.difficulty]
        if m is None or not lo <= m <= hi:
            raise SuiteError(
                f"task {i} claims {task.difficulty} but its minimal plan length "
                f"is {m}, outside [{lo}, {hi}]"
            )
        if m != task.min_steps:
            raise SuiteError(
                f"task {i} records min_steps={task.min_steps} but the oracle says {m}"
            )


def _sample_task(spec: DomainSpec, start: SymbolicState, rng: RandomSource) -> SuiteTask | None:
    """Walk forward from `start`, then pose some of the walked state as a goal."""
    state = start
    walk = 1 + rng.choice(DEFAULT_MAX_LEN)
    for _ in range(walk):
        applicable = [op for op in spec.operators if state.satisfies(op.pre)]
        if not applicable:
            break
        state = apply_operator(spec, state, applicable[rng.choice(len(applicable))].binding)
    keys = sorted(state.predicates)
    order = list(range(len(keys)))
    rng.shuffle(order)
    n_literals = 1 + rng.choice(_MAX_GOAL_LITERALS)
    literals = tuple(
        Literal(keys[i], state.predicates[keys[i]]) for i in order[:n_literals]
    )
    m = minimal_plan_length(spec, start, literals)
    level = classify(m)
    if level is None:
        return None
    return SuiteTask(Goal(literals), start, level, m)


def generate_suite(
    spec: DomainSpec,
    seed: int,
    counts: tuple[int, int, int] = DEFAULT_COUNTS,
) -> PromptSuite:
    """Sample a deduplicated suite with the requested per-level counts.

    Deterministic for a fixed (spec, seed, counts). Raises SuiteError,
    naming the level, when the domain cannot fill a bucket.
    """
    if len(counts) != len(DIFFICULTIES):
        raise SuiteError(f"counts must have {len(DIFFICULTIES)} entries, got {len(counts)}")
    if any(c < 0 for c in counts):
        raise SuiteError(f"counts must be >= 0, got {counts}")
    need = dict(zip(DIFFICULTIES, counts))
    rng = RandomSource(seed)
    start = spec.initial_state()
    found: dict[str, list[SuiteTask]] = {d: [] for d in DIFFICULTIES}
    seen: set[tuple[str, ...]] = set()
    budget = _ATTEMPTS_PER_TASK * max(sum(counts), 1)
    for _ in range(budget):
        if all(len(found[d]) >= need[d] for d in DIFFICULTIES):
            break
        task = _sample_task(spec, start, rng)
        if task is None or len(found[task.difficulty]) >= need[task.difficulty]:
            continue
        if task.key() in seen:
            continue
        seen.add(task.key())
        found[task.difficulty].append(task)
    for name in DIFFICULTIES:
        if len(found[name]) < need[name]:
            raise SuiteError(
                f"domain {spec.name!r} produced {len(found[name])} of {need[name]} "
                f"{name} tasks; it cannot fill that level"
            )
    tasks = tuple(task for name in DIFFICULTIES for task in found[name])
    return PromptSuite(spec, tasks)


def save_suite(suite: PromptSuite, path: str | Path) -> Path:
    """Write the suite as schema-tagged JSON. Start states are not stored:

    every task starts from the domain's initial state, so the domain name
    pins them down and load_suite rebuilds them.
    """
    path = Path(path)
    payload = {
        "format": SUITE_FORMAT,
        "domain": suite.domain,
        "tasks": [
            {
                "difficulty": t.difficulty,
                "min_steps": t.min_steps,
                "literals": [[lit.pred, lit.value] for lit in t.goal.literals],
                "text": t.goal.text,
            }
            for t in suite.tasks
        ],
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def load_suite(path: str | Path, spec: DomainSpec | None = None) -> PromptSuite:
    """Read a saved suite; loads the builtin domain unless a spec is passed."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SuiteError(f"cannot read suite file {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != SUITE_FORMAT:
        raise SuiteError(f"{path} is not a {SUITE_FORMAT} file")
    domain = payload.get("domain", "")
    if spec is None:
        spec = load_domain(domain)
    elif spec.name != domain:
        raise SuiteError(f"suite was built for domain {domain!r}, got spec {spec.name!r}")
    start = spec.initial_state()
    tasks = []
    for i, row in enumerate(payload.get("tasks", [])):
        try:
            literals = tuple(Literal(pred, bool(value)) for pred, value in row["literals"])
            task = SuiteTask(
                Goal(literals, row.get("text", "")),
                start,
                row["difficulty"],
                int(row["min_steps"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SuiteError(f"{path}: malformed task {i}: {exc}") from exc
        if task.difficulty not in DIFFICULTIES:
            raise SuiteError(f"{path}: task {i} has unknown difficulty {task.difficulty!r}")
        tasks.append(task)
    return PromptSuite(spec, tuple(tasks))
