"""Command-line interface and layered run configuration."""

from .config import DEFAULTS, RunConfig, UsageError, resolve_config, write_config
from .main import build_parser, main

__all__ = [
    "DEFAULTS",
    "RunConfig",
    "UsageError",
    "build_parser",
    "main",
    "resolve_config",
    "write_config",
]
