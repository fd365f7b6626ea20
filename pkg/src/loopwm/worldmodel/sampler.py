"""Segment samplers for the velocity-field policy.

Noise convention: a segment is generated as one flat vector of width F*d.
Latents follow z_t = (1-t)*x0 + t*eps, so t=1 is pure noise and t=0 is data.
The network predicts the velocity u = dz/dt (target eps - x0); generation
integrates from t=1 down to t=0 on a uniform grid with step dt = 1/K.

The stochastic sampler adds the analytic score correction

    dz = [u - 0.5*eta_t^2 * score] dt + eta_t dW,   eta_t = a*sqrt(t)

with score = -(z - alpha_t*x_pred)/sigma_t^2, alpha_t = 1-t,
sigma_t = max(t, delta), and the rectified-flow identity x_pred = z - t*u.
Every stochastic transition is Gaussian with mean z - drift*dt and
std eta_t*sqrt(dt); traces record enough per step to recompute the mean
under fresh parameters, which is what importance ratios need.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DivergenceError, LoopwmError
from ..microworld import Segment
from ..numerics import NetParams, RandomSource, gaussian_logpdf, net_forward


@dataclass(frozen=True)
class SamplerConfig:
    """Denoising schedule parameters plus the segment shape they produce."""

    k_steps: int = 10
    eta_scale: float = 0.3
    delta: float = 1e-3
    n_frames: int = 16
    frame_width: int = 0

    def __post_init__(self):
        if self.k_steps < 1:
            raise LoopwmError(f"k_steps must be >= 1, got {self.k_steps}")
        if self.eta_scale < 0:
            raise LoopwmError(f"eta_scale must be >= 0, got {self.eta_scale}")
        if self.delta <= 0:
            raise LoopwmError(f"delta must be > 0, got {self.delta}")
        if self.n_frames < 2:
            raise LoopwmError(f"n_frames must be >= 2, got {self.n_frames}")

    @property
    def latent_width(self) -> int:
        return self.n_frames * self.frame_width

    def time_grid(self) -> list[float]:
        """Evaluation times t_k = 1 - k/K for k = 0..K-1 (uniform on (0,1])."""
        return [1.0 - k / self.k_steps for k in range(self.k_steps)]


@dataclass(frozen=True)
class TraceStep:
    """One denoising transition, self-contained for replay.

    ``std`` comes from the schedule alone; only ``u`` and ``mean`` depend on
    the parameters that sampled the step.  Deterministic transitions
    (eta_scale = 0) record std = 0 and a placeholder logp of 0.0; they carry
    no density and transition_logprob refuses them.
    """

    t: float
    dt: float
    z: np.ndarray
    u: np.ndarray
    mean: np.ndarray
    std: float
    z_next: np.ndarray
    logp: float


@dataclass
class DenoiseTrace:
    """Full record of one SDE rollout: K transitions plus the condition."""

    cond: np.ndarray
    steps: list[TraceStep] = field(default_factory=list)

    @property
    def total_logp(self) -> float:
        return float(sum(s.logp for s in self.steps))


def velocity(theta: NetParams, z: np.ndarray, t: float, cond: np.ndarray) -> np.ndarray:
    """Network velocity estimate at (z, t, cond)."""
    if not 0.0 < t <= 1.0:
        raise LoopwmError(f"t must lie in (0, 1], got {t}")
    z = np.asarray(z, dtype=np.float64)
    cond = np.asarray(cond, dtype=np.float64)
    x = np.concatenate([z, [t], cond])
    if x.shape[0] != theta.sizes[0]:
        raise LoopwmError(
            f"velocity input width {x.shape[0]} does not match net input {theta.sizes[0]}"
        )
    return net_forward(theta, x)


def velocity_input(z: np.ndarray, t: float, cond: np.ndarray) -> np.ndarray:
    """The flattened network input for (z, t, cond); exposed for batched callers."""
    return np.concatenate([np.asarray(z, dtype=np.float64), [t], np.asarray(cond, dtype=np.float64)])


def score_term(z: np.ndarray, x_pred: np.ndarray, t: float, delta: float = 1e-3) -> np.ndarray:
    """Analytic conditional score -(z - (1-t)*x_pred) / max(t, delta)^2."""
    if not 0.0 < t <= 1.0:
        raise LoopwmError(f"t must lie in (0, 1], got {t}")
    sigma = max(t, delta)
    return -(np.asarray(z) - (1.0 - t) * np.asarray(x_pred)) / (sigma * sigma)


def _check_finite(z: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(z)):
        raise DivergenceError(f"non-finite sampler state at t={t}")


def _to_segment(z: np.ndarray, config: SamplerConfig) -> Segment:
    frames = np.asarray(z, dtype=np.float64).reshape(config.n_frames, config.frame_width)
    return Segment(frames=frames)


def sample_ode(theta: NetParams, cond: np.ndarray, z_init: np.ndarray,
               config: SamplerConfig) -> Segment:
    """Deterministic Euler integration of dz = u dt from t=1 to t=0."""
    z = np.asarray(z_init, dtype=np.float64).copy()
    if z.shape[0] != config.latent_width:
        raise LoopwmError(f"z has width {z.shape[0]}, expected {config.latent_width}")
    dt = 1.0 / config.k_steps
    for t in config.time_grid():
        u = velocity(theta, z, t, cond)
        z = z - u * dt
        _check_finite(z, t)
    return _to_segment(z, config)


def sample_sde(theta: NetParams, cond: np.ndarray, z_init: np.ndarray,
               config: SamplerConfig, rng: RandomSource) -> tuple[Segment, DenoiseTrace]:
    """Euler-Maruyama integration of the score-corrected reverse SDE.

    With eta_scale = 0 the diffusion and score terms vanish and the path is
    bitwise identical to sample_ode on the same grid.
    """
    z = np.asarray(z_init, dtype=np.float64).copy()
    if z.shape[0] != config.latent_width:
        raise LoopwmError(f"z has width {z.shape[0]}, expected {config.latent_width}")
    dt = 1.0 / config.k_steps
    trace = DenoiseTrace(cond=np.asarray(cond, dtype=np.float64))
    for t in config.time_grid():
        u = velocity(theta, z, t, cond)
        if config.eta_scale == 0.0:
            # keep the arithmetic identical to the ODE branch: no score term,
            # no noise add, so the paths agree bitwise
            mean = z - u * dt
            step = TraceStep(t=t, dt=dt, z=z, u=u, mean=mean, std=0.0,
                             z_next=mean, logp=0.0)
        else:
            x_pred = z - t * u
            eta = config.eta_scale * np.sqrt(t)
            drift = u - 0.5 * eta * eta * score_term(z, x_pred, t, config.delta)
            mean = z - drift * dt
            std = float(eta * np.sqrt(dt))
            noise = rng.normal(shape=z.shape[0])
            z_next = mean + std * noise
            logp = gaussian_logpdf(z_next, mean, std)
            step = TraceStep(t=t, dt=dt, z=z, u=u, mean=mean, std=std,
                             z_next=z_next, logp=logp)
        trace.steps.append(step)
        z = step.z_next
        _check_finite(z, t)
    return _to_segment(z, config), trace


def transition_mean(theta: NetParams, step: TraceStep, cond: np.ndarray,
                    delta: float = 1e-3) -> tuple[np.ndarray, np.ndarray]:
    """Recompute a trace step's transition mean under fresh parameters.

    Returns (mean, u).  The std never depends on theta, so callers reuse
    step.std.
    """
    u = velocity(theta, step.z, step.t, cond)
    x_pred = step.z - step.t * u
    eta_sq = (step.std * step.std) / step.dt
    drift = u - 0.5 * eta_sq * score_term(step.z, x_pred, step.t, delta)
    return step.z - drift * step.dt, u


def transition_logprob(theta: NetParams, step: TraceStep, cond: np.ndarray,
                       delta: float = 1e-3) -> float:
    """Log-density of the recorded next state under theta's transition mean."""
    if step.std <= 0.0:
        raise LoopwmError(
            "transition has degenerate std; stochastic sampling (eta_scale > 0) "
            "is required for likelihood ratios"
        )
    mean, _ = transition_mean(theta, step, cond, delta)
    return gaussian_logpdf(step.z_next, mean, step.std)


def mean_velocity_coeff(step: TraceStep, delta: float = 1e-3) -> float:
    """Scalar c with d(mean)/d(u) = c * I for one transition.

    Substituting x_pred = z - t*u into the score makes the mean affine in u:
      mean = z - dt*u - dt*(eta^2/2) * (t*z + t*(1-t)*u) / sigma^2
    so c = -dt * (1 + eta^2 * t * (1-t) / (2*sigma^2)).  Gradients of the
    transition log-density w.r.t. the network output reduce to
    c * (z_next - mean) / std^2.
    """
    t = step.t
    sigma = max(t, delta)
    eta_sq = (step.std * step.std) / step.dt
    return float(-step.dt * (1.0 + eta_sq * t * (1.0 - t) / (2.0 * sigma * sigma)))
