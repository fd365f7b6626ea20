"""Adaptive-moment gradient descent (Adam with bias correction).

`opt_step` is functional: it returns fresh parameter and state objects and
never mutates its inputs. Gradients follow the `params_as_list` ordering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .net import NetParams, params_as_list
from .tensor import Tensor

DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPS = 1e-8


@dataclass
class OptState:
    """First/second moment estimates per parameter array plus a step counter."""

    m: list[Tensor]
    v: list[Tensor]
    step: int = 0


def opt_init(params: NetParams) -> OptState:
    flat = params_as_list(params)
    return OptState([np.zeros_like(a) for a in flat], [np.zeros_like(a) for a in flat], 0)


def opt_step(
    params: NetParams,
    grads: list[Tensor],
    state: OptState,
    lr: float,
    beta1: float = DEFAULT_BETA1,
    beta2: float = DEFAULT_BETA2,
    eps: float = DEFAULT_EPS,
) -> tuple[NetParams, OptState]:
    """One descent step along `grads`; pass the negated gradient to ascend."""
    flat = params_as_list(params)
    if len(grads) != len(flat):
        raise ValueError(f"got {len(grads)} gradient arrays, expected {len(flat)}")
    t = state.step + 1
    new_m, new_v, new_flat = [], [], []
    for p, g, m, v in zip(flat, grads, state.m, state.v):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m2 = beta1 * m + (1.0 - beta1) * g
        v2 = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m2 / (1.0 - beta1**t)
        v_hat = v2 / (1.0 - beta2**t)
        new_flat.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m2)
        new_v.append(v2)
    new_params = NetParams(
        params.sizes,
        [new_flat[2 * i] for i in range(len(params.weights))],
        [new_flat[2 * i + 1] for i in range(len(params.weights))],
        params.activation,
    )
    return new_params, OptState(new_m, new_v, t)
