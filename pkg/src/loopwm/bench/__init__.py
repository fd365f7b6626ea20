"""Difficulty-stratified evaluation: suites, metrics, comparisons, curves."""

from .compare import ComparisonTable, compare
from .curves import emit_curves
from .metrics import (
    MODES,
    SCALE_METRICS,
    MetricReport,
    MetricRow,
    evaluate_policy,
    load_report,
    mode_config,
)
from .oracle import DEFAULT_MAX_LEN, minimal_plan_length
from .suite import (
    BANDS,
    DEFAULT_COUNTS,
    DIFFICULTIES,
    PromptSuite,
    SuiteTask,
    classify,
    generate_suite,
    load_suite,
    save_suite,
    verify_suite,
)

__all__ = [
    "BANDS",
    "ComparisonTable",
    "DEFAULT_COUNTS",
    "DEFAULT_MAX_LEN",
    "DIFFICULTIES",
    "MODES",
    "MetricReport",
    "MetricRow",
    "PromptSuite",
    "SCALE_METRICS",
    "SuiteTask",
    "classify",
    "compare",
    "emit_curves",
    "evaluate_policy",
    "generate_suite",
    "load_report",
    "load_suite",
    "minimal_plan_length",
    "mode_config",
    "save_suite",
    "verify_suite",
]
