"""Action-quality metrics over a task suite.

One closed-loop episode per task. Action completeness is the fraction of
the final plan's steps that were executed with their post literals actually
holding in the generated frames (not just in symbolic memory). The three
1-5 scale metrics are affine maps 1 + 4*u of unit-interval critic scores,
averaged over every generated segment in the bucket:

  motion smoothness   intra-segment temporal coherence, plus one boundary
                      sample per consecutive accepted pair scoring the jump
                      between segments against the same curvature scale
  object interaction  contact-window score, skipping segments whose step
                      has no motion profile; all-skipped buckets report N/A
  physical fidelity   per-frame physics compliance

Episodes run concurrently (they are independent and the policy is only
read); the report is assembled in task order, so results do not depend on
scheduling.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
import json

import numpy as np

from ..critic.scoring import COHERENCE_SCALE
from ..errors import NoPlanError, SuiteError
from ..loop import EpisodeLog, LoopConfig, run_episode
from ..microworld import Segment
from ..numerics import RandomSource
from .suite import DIFFICULTIES, PromptSuite

REPORT_FORMAT = "loopwm-report-v1"

SCALE_METRICS = ("motion_smoothness", "object_interaction", "physical_fidelity")

# loop configurations for the standard ablation rows
MODES = ("open-loop", "inner-only", "full")

# a step counts as completed only if its accepted segment really shows the
# post literals; the score is a mean of 0/1 hits, so 1.0 is exact
_COMPLETE_EPS = 1e-9


def mode_config(mode: str, **overrides) -> LoopConfig:
    """LoopConfig preset: no feedback, inner retries only, or both loops."""
    if mode == "open-loop":
        base = {"k_retries": 0, "max_outer_replans": 0}
    elif mode == "inner-only":
        base = {"max_outer_replans": 0}
    elif mode == "full":
        base = {}
    else:
        raise SuiteError(f"unknown mode {mode!r}, expected one of {MODES}")
    base.update(overrides)
    return LoopConfig(**base)


@dataclass
class MetricRow:
    """Aggregates for one bucket of tasks (a difficulty level, or all)."""

    n_tasks: int
    action_completeness: float
    success_rate: float
    motion_smoothness: float | None
    object_interaction: float | None
    physical_fidelity: float | None

    def to_dict(self) -> dict:
        def r(v):
            return None if v is None else round(v, 6)

        return {
            "n_tasks": self.n_tasks,
            "action_completeness": r(self.action_completeness),
            "success_rate": r(self.success_rate),
            "motion_smoothness": r(self.motion_smoothness),
            "object_interaction": r(self.object_interaction),
            "physical_fidelity": r(self.physical_fidelity),
        }


@dataclass
class MetricReport:
    domain: str
    suite_digest: str
    overall: MetricRow
    by_difficulty: dict[str, MetricRow] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "domain": self.domain,
            "suite_digest": self.suite_digest,
            "overall": self.overall.to_dict(),
            "by_difficulty": {d: row.to_dict() for d, row in self.by_difficulty.items()},
        }

    def write_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path


def load_report(path: str | Path) -> MetricReport:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SuiteError(f"cannot read report file {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != REPORT_FORMAT:
        raise SuiteError(f"{path} is not a {REPORT_FORMAT} file")

    def row(d: dict) -> MetricRow:
        return MetricRow(
            n_tasks=int(d["n_tasks"]),
            action_completeness=float(d["action_completeness"]),
            success_rate=float(d["success_rate"]),
            motion_smoothness=None if d["motion_smoothness"] is None else float(d["motion_smoothness"]),
            object_interaction=None if d["object_interaction"] is None else float(d["object_interaction"]),
            physical_fidelity=None if d["physical_fidelity"] is None else float(d["physical_fidelity"]),
        )

    try:
        return MetricReport(
            domain=payload["domain"],
            suite_digest=payload["suite_digest"],
            overall=row(payload["overall"]),
            by_difficulty={d: row(v) for d, v in payload["by_difficulty"].items()},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SuiteError(f"{path}: malformed report: {exc}") from exc


class _RecordingPolicy:
    """Pass-through wrapper that keeps every generated segment, in call order.

    The engine logs one AttemptRecord per generate() call, so the recorded
    segments align 1:1 with log.attempts.
    """

    def __init__(self, inner):
        self.inner = inner
        self.segments: list[Segment] = []

    def generate(self, step, memory, rng):
        segment = self.inner.generate(step, memory, rng)
        self.segments.append(segment)
        return segment


@dataclass
class _EpisodeSamples:
    completeness: float
    succeeded: bool
    smoothness: list[float]
    interaction: list[float]
    fidelity: list[float]


def _boundary_score(prev: Segment, nxt: Segment) -> float:
    """Score the jump between consecutive accepted segments.

    The next segment should pick up where the last one stopped; the mean
    squared frame delta across the junction is judged against the same
    scale the critic uses for intra-segment curvature.
    """
    delta = nxt.frames[0] - prev.frames[-1]
    msd = float(np.mean(delta * delta))
    return 1.0 - min(max(msd / COHERENCE_SCALE, 0.0), 1.0)


def _episode_samples(log: EpisodeLog, segments: list[Segment]) -> _EpisodeSamples:
    completed = 0
    smooth: list[float] = []
    inter: list[float] = []
    fidel: list[float] = []
    accepted: list[Segment] = []
    for attempt, segment in zip(log.attempts, segments):
        scores = attempt.report.scores
        smooth.append(scores["temporal_coherence"])
        if attempt.report.details.get("contact_applicable", True):
            inter.append(scores["object_interaction"])
        fidel.append(scores["physical_realism"])
        if attempt.accepted:
            accepted.append(segment)
            if scores["goal_achievement"] >= 1.0 - _COMPLETE_EPS:
                completed += 1
    for prev, nxt in zip(accepted, accepted[1:]):
        smooth.append(_boundary_score(prev, nxt))
    denom = max(log.plan_length, 1)
    return _EpisodeSamples(
        completeness=completed / denom,
        succeeded=log.succeeded,
        smoothness=smooth,
        interaction=inter,
        fidelity=fidel,
    )


def _aggregate(samples: list[_EpisodeSamples]) -> MetricRow:
    def pooled(lists: list[list[float]]) -> float | None:
        flat = [v for chunk in lists for v in chunk]
        if not flat:
            return None
        return 1.0 + 4.0 * float(np.mean(flat))

    return MetricRow(
        n_tasks=len(samples),
        action_completeness=float(np.mean([s.completeness for s in samples])),
        success_rate=float(np.mean([1.0 if s.succeeded else 0.0 for s in samples])),
        motion_smoothness=pooled([s.smoothness for s in samples]),
        object_interaction=pooled([s.interaction for s in samples]),
        physical_fidelity=pooled([s.fidelity for s in samples]),
    )


def evaluate_policy(
    policy,
    suite: PromptSuite,
    config: LoopConfig | None = None,
    critic=None,
    rng: RandomSource | None = None,
    max_workers: int | None = None,
) -> MetricReport:
    """Run one episode per task and aggregate the metric set.

    Unsolvable tasks do not raise: they contribute zero completeness and a
    failed episode, per the convention that evaluation never aborts.
    """
    if not suite.tasks:
        raise SuiteError("cannot evaluate an empty suite")
    config = config or LoopConfig()
    rng = rng or RandomSource(0)
    spec = suite.spec

    def run_one(index: int) -> _EpisodeSamples:
        task = suite.tasks[index]
        recorder = _RecordingPolicy(policy)
        try:
            log = run_episode(
                spec,
                task.goal,
                recorder,
                config=config,
                rng=rng.split(index),
                critic=critic,
            )
        except NoPlanError:
            return _EpisodeSamples(0.0, False, [], [], [])
        return _episode_samples(log, recorder.segments)

    n = len(suite.tasks)
    workers = max_workers if max_workers is not None else min(4, n)
    if workers <= 1:
        per_task = [run_one(i) for i in range(n)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_task = list(pool.map(run_one, range(n)))

    by_difficulty = {}
    for name in DIFFICULTIES:
        bucket = [s for s, t in zip(per_task, suite.tasks) if t.difficulty == name]
        if bucket:
            by_difficulty[name] = _aggregate(bucket)
    return MetricReport(
        domain=suite.domain,
        suite_digest=suite.digest,
        overall=_aggregate(per_task),
        by_difficulty=by_difficulty,
    )
