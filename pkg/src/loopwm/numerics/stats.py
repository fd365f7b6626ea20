"""Gaussian log-densities and the central-difference gradient oracle."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .net import NetParams, clone_params, params_as_list, zeros_like_grads
from .tensor import Tensor

LOG_2PI = math.log(2.0 * math.pi)


def gaussian_logpdf(x: Tensor, mean: Tensor, std: float) -> float:
    """Sum of elementwise normal log-densities with a shared scalar std."""
    if not std > 0.0:
        raise ValueError(f"std must be positive, got {std}")
    x = np.asarray(x, dtype=np.float64)
    mean = np.asarray(mean, dtype=np.float64)
    if x.shape != mean.shape:
        raise ValueError(f"x shape {x.shape} does not match mean shape {mean.shape}")
    z = (x - mean) / std
    n = x.size
    return float(-0.5 * LOG_2PI * n - n * math.log(std) - 0.5 * np.sum(z * z))


def finite_diff_grad(
    fn: Callable[[NetParams], float], params: NetParams, h: float = 1e-5
) -> list[Tensor]:
    """Central differences of a scalar objective over every parameter coordinate.

    Independent oracle for `net_backward`-derived gradients; keep it free of
    any analytic-gradient code. O(2 * n_params) objective evaluations, so use
    small nets in tests.
    """
    if h <= 0:
        raise ValueError("step size h must be positive")
    work = clone_params(params)
    arrays = params_as_list(work)
    grads = zeros_like_grads(params)
    for arr, grad in zip(arrays, grads):
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = fn(work)
            flat[i] = orig - h
            f_minus = fn(work)
            flat[i] = orig
            gflat[i] = (f_plus - f_minus) / (2.0 * h)
    return grads
