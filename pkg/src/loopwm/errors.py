"""Shared exception hierarchy.

Every module raises subclasses of LoopwmError so callers (CLI, loop engine)
can distinguish usage errors from runtime failures without string matching.
"""


class LoopwmError(Exception):
    """Base class for all package-specific errors."""


class CheckpointError(LoopwmError):
    """Raised for malformed, truncated, or incompatible checkpoint files."""


class DomainError(LoopwmError):
    """Raised for malformed domain files or references to unknown symbols."""


class PreconditionError(LoopwmError):
    """Raised when an operator is applied in a state that violates its preconditions."""


class NoPlanError(LoopwmError):
    """Raised when search exhausts the budget or the goal is unreachable."""


class DivergenceError(LoopwmError):
    """Raised when an iterative numeric procedure produces non-finite state."""


class WireError(LoopwmError):
    """Raised for wire payloads that do not match the documented schemas."""


class RemoteError(LoopwmError):
    """Raised when a remote backend fails after retries or returns garbage."""


class SuiteError(LoopwmError):
    """Raised when a benchmark suite cannot be generated or reconciled."""
