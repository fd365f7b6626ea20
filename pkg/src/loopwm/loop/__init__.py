"""Closed-loop think-act-reflect engine."""

from ..memory import Transition, WorldMemory
from .engine import (
    STATUS_BUDGET,
    STATUS_PLAN_FAILURE,
    STATUS_SUCCESS,
    AttemptRecord,
    EpisodeLog,
    LoopConfig,
    ReplanEvent,
    SearchPlanner,
    default_critic,
    inner_refine,
    memory_update,
    run_episode,
    write_episode_logs,
)
from .policies import FrozenPolicy, OraclePolicy, Policy

__all__ = [
    "AttemptRecord",
    "EpisodeLog",
    "FrozenPolicy",
    "LoopConfig",
    "OraclePolicy",
    "Policy",
    "ReplanEvent",
    "STATUS_BUDGET",
    "STATUS_PLAN_FAILURE",
    "STATUS_SUCCESS",
    "SearchPlanner",
    "Transition",
    "WorldMemory",
    "default_critic",
    "inner_refine",
    "memory_update",
    "run_episode",
    "write_episode_logs",
]
