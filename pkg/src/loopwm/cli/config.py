"""Layered run configuration: defaults, then a YAML file, then flags.

The resolved result is written into every run directory so a run can be
reproduced from its artifacts alone.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, fields
from pathlib import Path

import yaml

from ..critic import CriticWeights
from ..errors import LoopwmError
from ..gateway import AgentBackend
from ..grpo import GrpoConfig
from ..loop import LoopConfig
from ..microworld import DomainSpec
from ..worldmodel import SamplerConfig


class UsageError(Exception):
    """Bad invocation or bad input artifact; maps to exit code 2."""


# Every resolvable knob with its default. File and flag values may only
# override keys that exist here; anything else is a typo worth rejecting.
DEFAULTS: dict = {
    "domain": "kitchen",
    "seed": 0,
    "out": None,
    "loop": {
        "tau": 0.7,
        "k_retries": 3,
        "max_outer_replans": 2,
        "max_total_segments": 64,
    },
    "sampler": {
        "k_steps": 10,
        "eta_scale": 0.3,
        "delta": 1e-3,
        "n_frames": 16,
    },
    "net": {
        "hidden": 64,
        "depth": 3,
    },
    "sft": {
        "demos": 200,
        "epochs": 50,
        "lr": 3e-3,
        "batch_size": 32,
        "jitter": 0.005,
    },
    "grpo": {
        "group_size": 8,
        "epsilon": 0.2,
        "beta": 0.01,
        "delta": 1e-8,
        "lr": 3e-4,
        "iterations": 300,
        "curriculum": [[1, 1], [101, 3], [201, 5]],
        "reward_source": "programmatic",
        "reward_dimension": None,
    },
    "critic": {
        "weights": [0.4, 0.15, 0.2, 0.15, 0.1],
    },
    "bench": {
        "counts": [20, 20, 10],
        "mode": "full",
        "suite_seed": None,
        "max_workers": None,
    },
    "backend": {
        "kind": "builtin",
        "base_url": None,
        "timeout": 5.0,
        "retries": 2,
        "token_env": None,
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved knobs for one command invocation."""

    domain: str
    seed: int
    out: str | None
    loop: dict
    sampler: dict
    net: dict
    sft: dict
    grpo: dict
    critic: dict
    bench: dict
    backend: dict

    def to_dict(self) -> dict:
        return {f.name: copy.deepcopy(getattr(self, f.name)) for f in fields(self)}

    # Typed views. Construction validates, so errors surface here with the
    # library's own messages rather than deep inside a run.

    def loop_config(self) -> LoopConfig:
        return LoopConfig(**self.loop)

    def sampler_config(self, spec: DomainSpec) -> SamplerConfig:
        return SamplerConfig(frame_width=spec.n_channels, **self.sampler)

    def grpo_config(self) -> GrpoConfig:
        raw = dict(self.grpo)
        raw["curriculum"] = tuple((int(a), int(b)) for a, b in raw["curriculum"])
        return GrpoConfig(**raw)

    def critic_weights(self) -> CriticWeights:
        weights = self.critic["weights"]
        if len(weights) != 5:
            raise UsageError(f"critic.weights needs 5 entries, got {len(weights)}")
        return CriticWeights(*[float(w) for w in weights])

    def agent_backend(self) -> AgentBackend:
        raw = self.backend
        if raw["kind"] == "builtin":
            return AgentBackend(kind="builtin")
        return AgentBackend(
            kind=raw["kind"],
            base_url=raw["base_url"] or "",
            timeout=float(raw["timeout"]),
            retries=int(raw["retries"]),
            token_env=raw["token_env"],
        )


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = dict(base)
    for key, value in override.items():
        if key not in base:
            raise UsageError(f"unknown config key {path + key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise UsageError(f"config key {path + key!r} must be a mapping")
            out[key] = _merge(base[key], value, path + key + ".")
        else:
            out[key] = value
    return out


def _set_path(tree: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = tree
    for part in parts[:-1]:
        node = node[part]
    node[parts[-1]] = value


def resolve_config(config_path: str | Path | None = None,
                   overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from defaults < file < flag overrides.

    `overrides` maps dotted key paths ("sft.epochs") to values; None values
    mean the flag was not given and are skipped.
    """
    tree = copy.deepcopy(DEFAULTS)
    if config_path is not None:
        path = Path(config_path)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        try:
            loaded = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise UsageError(f"cannot parse config file {path}: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise UsageError(f"config file {path} must hold a mapping")
        tree = _merge(tree, loaded)
    for dotted, value in (overrides or {}).items():
        if value is not None:
            _set_path(tree, dotted, value)
    config = RunConfig(**tree)
    try:
        config.loop_config()
        config.grpo_config()
        config.critic_weights()
        config.agent_backend()
    except (LoopwmError, ValueError, TypeError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc
    return config


def write_config(config: RunConfig, path: str | Path) -> Path:
    """Serialize the resolved config; the copy makes runs reproducible."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(config.to_dict(), sort_keys=True))
    return path


def load_run_config(path: str | Path) -> RunConfig:
    """Read back a config written by `write_config` (used by --resume)."""
    return resolve_config(path)
