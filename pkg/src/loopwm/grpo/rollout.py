"""Shared-noise group rollouts and group-wise advantage normalization.

Every member of a group denoises from the same initial latent; members differ
only through the Wiener increments of their reverse-SDE paths. Sharing the
initial noise keeps the group comparable so that reward differences reflect
the stochastic paths rather than the starting point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..critic import CriticReport, RewardModelParams, evaluate, features, rm_score
from ..errors import LoopwmError
from ..memory import WorldMemory
from ..microworld import DomainSpec, Segment
from ..numerics import NetParams, RandomSource
from ..planner import PlanStep
from ..worldmodel import DenoiseTrace, SamplerConfig, embed_condition, sample_sde
from .config import GrpoConfig

__all__ = [
    "GroupMember",
    "RolloutGroup",
    "compute_advantages",
    "member_reward",
    "rollout_group",
]


@dataclass(frozen=True)
class GroupMember:
    segment: Segment
    trace: DenoiseTrace
    report: CriticReport
    reward: float


@dataclass
class RolloutGroup:
    """One shared-noise group: z_init, members, and (once computed) advantages."""

    z_init: np.ndarray
    cond: np.ndarray
    members: tuple[GroupMember, ...]
    advantages: np.ndarray | None = None

    @property
    def rewards(self) -> np.ndarray:
        return np.array([m.reward for m in self.members], dtype=np.float64)

    def best_member(self) -> GroupMember:
        """Member with the highest reward (first on ties)."""
        index = int(np.argmax(self.rewards))
        return self.members[index]


def compute_advantages(rewards, delta: float = 1e-8) -> np.ndarray:
    """Group-normalized advantages A_i = (r_i - mean) / (population std + delta)."""
    rewards = np.asarray(rewards, dtype=np.float64)
    if rewards.ndim != 1 or rewards.size < 2:
        raise LoopwmError(f"advantages need at least two rewards, got shape {rewards.shape}")
    if delta <= 0.0:
        raise LoopwmError(f"delta must be positive, got {delta}")
    std = float(rewards.std())
    return (rewards - rewards.mean()) / (std + delta)


def member_reward(
    spec: DomainSpec,
    segment: Segment,
    step: PlanStep,
    report: CriticReport,
    config: GrpoConfig,
    reward_model: RewardModelParams | None = None,
) -> float:
    """Scalar reward for one rollout, per the configured source.

    Programmatic: the critic scalar (or one named dimension). Blended: equal
    mix of that and the learned reward model's score squashed to (0, 1).
    """
    if config.reward_dimension is not None:
        if config.reward_dimension not in report.scores:
            raise LoopwmError(
                f"unknown reward dimension {config.reward_dimension!r}; "
                f"critic reports {sorted(report.scores)}"
            )
        base = report.scores[config.reward_dimension]
    else:
        base = report.scalar
    if config.reward_source == "blended":
        if reward_model is None:
            raise LoopwmError("blended reward requires a reward model")
        raw = rm_score(reward_model, features(spec, segment, step))
        base = 0.5 * base + 0.5 / (1.0 + math.exp(-raw))
    return float(base)


def rollout_group(
    theta_old: NetParams,
    spec: DomainSpec,
    step: PlanStep,
    memory: WorldMemory,
    sampler_config: SamplerConfig,
    grpo_config: GrpoConfig,
    rng: RandomSource,
    *,
    critic=None,
    reward_model: RewardModelParams | None = None,
    shared_member_streams: bool = False,
) -> RolloutGroup:
    """Sample G segments from one shared z_init under the frozen sampling policy.

    `critic` is a callable (spec, segment, step) -> CriticReport, defaulting to
    the programmatic critic. `shared_member_streams` is a test hook that gives
    every member the same Wiener stream, collapsing the group to G identical
    rollouts.
    """
    if sampler_config.eta_scale <= 0.0:
        raise LoopwmError(
            "group rollouts need eta_scale > 0; with a deterministic sampler "
            "all members would coincide and there is nothing to rank"
        )
    cond = embed_condition(spec, step, memory)
    z_init = np.asarray(rng.normal(shape=sampler_config.latent_width), dtype=np.float64)
    members = []
    for index in range(grpo_config.group_size):
        stream = rng.split(0 if shared_member_streams else index)
        segment, trace = sample_sde(theta_old, cond, z_init, sampler_config, stream)
        if critic is None:
            report = evaluate(spec, segment, step)
        else:
            report = critic(spec, segment, step)
        reward = member_reward(spec, segment, step, report, grpo_config, reward_model)
        members.append(GroupMember(segment=segment, trace=trace, report=report, reward=reward))
    return RolloutGroup(z_init=z_init, cond=cond, members=tuple(members))
