"""Supervised flow-matching training and the bundled demonstration generator.

The regression target follows the rectified-flow convention: for a clean
segment x, noise eps, and t ~ Uniform(0,1], the latent is
z_t = (1-t)*x + t*eps and the velocity target is eps - x.
"""

from __future__ import annotations

import numpy as np

from ..errors import DivergenceError, LoopwmError
from ..memory import WorldMemory
from ..microworld import DomainSpec, Segment, reference_segment
from ..numerics import (
    NetParams,
    RandomSource,
    net_backward_batch,
    net_forward_batch,
    opt_init,
    opt_step,
)
from ..planner import PlanStep
from .context import context_width, embed_condition
from .sampler import SamplerConfig


def velocity_net_sizes(spec: DomainSpec, config: SamplerConfig, hidden: int = 64,
                       depth: int = 3) -> list[int]:
    """Layer sizes for a velocity net over (z, t, cond) on this domain."""
    width_in = config.latent_width + 1 + context_width(spec)
    return [width_in] + [hidden] * depth + [config.latent_width]


def flow_matching_loss(theta: NetParams, conds: np.ndarray, xs: np.ndarray,
                       ts: np.ndarray, eps: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Mean squared velocity error and its parameter gradient on one batch.

    The (t, eps) draws are explicit arguments so a finite-difference oracle
    can re-evaluate the exact same loss surface.
    """
    conds = np.asarray(conds, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    ts = np.asarray(ts, dtype=np.float64).reshape(-1, 1)
    eps = np.asarray(eps, dtype=np.float64)
    if not (conds.shape[0] == xs.shape[0] == ts.shape[0] == eps.shape[0]):
        raise LoopwmError("batch arrays disagree on length")
    z_t = (1.0 - ts) * xs + ts * eps
    inputs = np.concatenate([z_t, ts, conds], axis=1)
    u = net_forward_batch(theta, inputs)
    resid = u - (eps - xs)
    n_terms = resid.size
    loss = float(np.sum(resid * resid) / n_terms)
    grads, _ = net_backward_batch(theta, inputs, 2.0 * resid / n_terms)
    return loss, grads


def sft_train(theta: NetParams, dataset: list[tuple[np.ndarray, Segment]], epochs: int,
              lr: float, rng: RandomSource, batch_size: int = 16,
              beta1: float = 0.9, beta2: float = 0.999) -> tuple[NetParams, list[float]]:
    """Minibatch Adam on the flow-matching objective.

    Returns (updated params, per-epoch mean training loss).  Zero epochs
    return the input parameters untouched.
    """
    if not dataset:
        raise LoopwmError("sft_train requires a non-empty dataset")
    conds = np.stack([np.asarray(c, dtype=np.float64) for c, _ in dataset])
    xs = np.stack([seg.frames.reshape(-1) for _, seg in dataset])
    latent = xs.shape[1]
    state = opt_init(theta)
    history: list[float] = []
    n = len(dataset)
    for _ in range(epochs):
        order = list(range(n))
        rng.shuffle(order)
        epoch_losses = []
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            ts = 1.0 - rng.uniform(shape=len(idx))  # uniform on (0, 1]
            eps = rng.normal(shape=(len(idx), latent))
            loss, grads = flow_matching_loss(theta, conds[idx], xs[idx], ts, eps)
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite flow-matching loss {loss}")
            theta, state = opt_step(theta, grads, state, lr=lr, beta1=beta1, beta2=beta2)
            epoch_losses.append(loss)
        history.append(float(np.mean(epoch_losses)))
    return theta, history


def build_demos(spec: DomainSpec, n_demos: int, rng: RandomSource, n_frames: int = 16,
                jitter: float = 0.005, max_walk: int = 6) -> list[tuple[np.ndarray, Segment]]:
    """Generate (condition, segment) pairs from random operator walks.

    Each walk starts at the domain's initial state and applies random
    applicable operators; segments come from the reference generator and the
    memory is advanced exactly as the loop would, so conditioning frames
    chain realistically.
    """
    demos: list[tuple[np.ndarray, Segment]] = []
    while len(demos) < n_demos:
        memory = WorldMemory.fresh(spec)
        walk_len = int(rng.integers(1, max_walk + 1))
        for sid in range(1, walk_len + 1):
            applicable = [op for op in spec.operators if memory.state.satisfies(op.pre)]
            if not applicable:
                break
            op = applicable[int(rng.integers(0, len(applicable)))]
            step = PlanStep(sid=sid, instruction=op.instruction,
                            actions=(op.binding,), pre=op.pre, post=op.post)
            segment = reference_segment(spec, memory.state, op.binding,
                                        n_frames=n_frames, rng=rng, jitter=jitter)
            cond = embed_condition(spec, step, memory)
            demos.append((cond, segment))
            memory.advance(step, segment, reward=1.0)
            if len(demos) >= n_demos:
                break
    return demos
