"""Parameter bundle, checkpoint sidecar, and the segment-generating policy."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from ..microworld import DomainSpec, Segment, domain_hash
from ..numerics import NetParams, RandomSource, clone_params, load_checkpoint, save_checkpoint
from .context import context_width, embed_condition
from .sampler import DenoiseTrace, SamplerConfig, sample_sde

MANIFEST_FORMAT = "loopwm-policy-v1"


@dataclass
class PolicyBundle:
    """The three parameter sets optimization juggles.

    ``theta`` is the live policy, ``theta_old`` the sampling snapshot synced
    at the start of each iteration, and ``reference`` the frozen supervised
    checkpoint the KL term pulls toward.
    """

    theta: NetParams
    theta_old: NetParams
    reference: NetParams

    def __post_init__(self):
        if not (self.theta.sizes == self.theta_old.sizes == self.reference.sizes):
            raise CheckpointError("bundle parameter sets must share one architecture")

    @classmethod
    def from_reference(cls, reference: NetParams) -> "PolicyBundle":
        return cls(theta=clone_params(reference), theta_old=clone_params(reference),
                   reference=reference)

    def sync_old(self) -> None:
        """theta_old <- theta (atomic snapshot swap between iterations)."""
        self.theta_old = clone_params(self.theta)


def _manifest_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def policy_manifest(spec: DomainSpec, config: SamplerConfig) -> dict:
    return {
        "format": MANIFEST_FORMAT,
        "domain_hash": domain_hash(spec),
        "n_frames": config.n_frames,
        "frame_width": config.frame_width,
        "k_steps": config.k_steps,
        "eta_scale": config.eta_scale,
        "delta": config.delta,
        "context_width": context_width(spec),
    }


def save_policy(path: str | Path, theta: NetParams, spec: DomainSpec,
                config: SamplerConfig) -> None:
    """Write the parameter checkpoint plus a JSON sidecar describing its world."""
    path = Path(path)
    save_checkpoint(path, theta)
    sidecar = _manifest_path(path)
    sidecar.write_text(json.dumps(policy_manifest(spec, config), indent=2, sort_keys=True))


def load_policy(path: str | Path, spec: DomainSpec, config: SamplerConfig) -> NetParams:
    """Load a checkpoint, refusing when the sidecar disagrees with (spec, config)."""
    path = Path(path)
    sidecar = _manifest_path(path)
    if not sidecar.exists():
        raise CheckpointError(f"missing policy manifest {sidecar}")
    try:
        manifest = json.loads(sidecar.read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"unreadable policy manifest {sidecar}: {exc}") from exc
    expected = policy_manifest(spec, config)
    mismatched = [
        key for key in expected
        if key != "delta" and manifest.get(key) != expected[key]
    ]
    if mismatched:
        detail = ", ".join(
            f"{k}: checkpoint {manifest.get(k)!r} vs requested {expected[k]!r}"
            for k in mismatched
        )
        raise CheckpointError(f"policy manifest mismatch ({detail})")
    return load_checkpoint(path)


class WorldModelPolicy:
    """Generates segments by denoising noise conditioned on (step, memory)."""

    def __init__(self, theta: NetParams, spec: DomainSpec, config: SamplerConfig):
        self.theta = theta
        self.spec = spec
        self.config = config

    def generate(self, step, memory, rng: RandomSource) -> Segment:
        segment, _ = self.generate_traced(step, memory, rng)
        return segment

    def generate_traced(self, step, memory, rng: RandomSource) -> tuple[Segment, DenoiseTrace]:
        cond = embed_condition(self.spec, step, memory)
        z_init = np.asarray(rng.normal(shape=self.config.latent_width), dtype=np.float64)
        return sample_sde(self.theta, cond, z_init, self.config, rng)
