"""A small fully-connected network with hand-written reverse-mode gradients.

The architecture is deliberately plain: affine layers with a smooth
activation on every hidden layer and a linear output layer. Gradients are
computed by explicit backprop (no autograd framework) so they can be checked
coordinate-by-coordinate against the central-difference oracle in
`stats.finite_diff_grad`; the two code paths must stay independent.

Checkpoint layout (all integers and floats little-endian):

    bytes 0..7   magic b"LWNET001"
    u8           length of the activation name, then that many ascii bytes
    u32          S, the number of layer sizes
    S * u32      layer sizes, input width first
    per layer    weight matrix (out*in float64, row-major), then bias (out float64)

The loader rejects wrong magic, unknown activations, truncated files, and
trailing bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..errors import CheckpointError
from .rng import RandomSource
from .tensor import Tensor, require_finite

MAGIC = b"LWNET001"

# name -> (forward, derivative-from-activation-value)
# softplus: a = log(1+e^x) so sigma(x) = 1 - e^(-a); smooth, so finite
# differences stay a valid oracle (unlike relu's kink)
_ACTIVATIONS: dict[str, tuple[Callable, Callable]] = {
    "tanh": (np.tanh, lambda a: 1.0 - a * a),
    "softplus": (lambda x: np.logaddexp(0.0, x), lambda a: 1.0 - np.exp(-a)),
}


@dataclass
class NetParams:
    """Ordered affine layers; weights[i] has shape (sizes[i+1], sizes[i])."""

    sizes: tuple[int, ...]
    weights: list[Tensor]
    biases: list[Tensor]
    activation: str = "tanh"

    def n_layers(self) -> int:
        return len(self.weights)

    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


def _check_params(params: NetParams) -> None:
    if params.activation not in _ACTIVATIONS:
        raise ValueError(f"unknown activation {params.activation!r}")
    if len(params.sizes) < 2 or len(params.weights) != len(params.sizes) - 1:
        raise ValueError("layer sizes and weight list disagree")
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        if w.shape != (params.sizes[i + 1], params.sizes[i]) or b.shape != (params.sizes[i + 1],):
            raise ValueError(f"layer {i} has shape {w.shape}/{b.shape}, expected "
                             f"({params.sizes[i + 1]}, {params.sizes[i]})")


def net_init(sizes: Sequence[int], rng: RandomSource, activation: str = "tanh") -> NetParams:
    """Glorot-scaled normal weights, zero biases."""
    sizes = tuple(int(s) for s in sizes)
    if activation not in _ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    gen = rng.generator()
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        scale = np.sqrt(2.0 / (fan_in + fan_out))
        weights.append(gen.standard_normal((fan_out, fan_in)) * scale)
        biases.append(np.zeros(fan_out))
    return NetParams(sizes, weights, biases, activation)


def clone_params(params: NetParams) -> NetParams:
    return NetParams(
        params.sizes,
        [w.copy() for w in params.weights],
        [b.copy() for b in params.biases],
        params.activation,
    )


def params_as_list(params: NetParams) -> list[Tensor]:
    """Canonical flat ordering [W0, b0, W1, b1, ...] shared with OptState and grads."""
    out: list[Tensor] = []
    for w, b in zip(params.weights, params.biases):
        out.append(w)
        out.append(b)
    return out


def zeros_like_grads(params: NetParams) -> list[Tensor]:
    return [np.zeros_like(a) for a in params_as_list(params)]


def net_forward_batch(params: NetParams, x: Tensor) -> Tensor:
    """Forward pass for a batch of row vectors, shape (n, sizes[0]) -> (n, sizes[-1])."""
    _check_params(params)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.sizes[0]:
        raise ValueError(f"input has shape {x.shape}, expected (n, {params.sizes[0]})")
    require_finite(x, "net input")
    act, _ = _ACTIVATIONS[params.activation]
    h = x
    last = params.n_layers() - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w.T + b
        if i < last:
            h = act(h)
    require_finite(h, "net output")
    return h


def net_forward(params: NetParams, x: Tensor) -> Tensor:
    """Single-vector forward pass, shape (sizes[0],) -> (sizes[-1],)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"input must be a vector, got shape {x.shape}")
    return net_forward_batch(params, x[None, :])[0]


def net_backward_batch(
    params: NetParams, x: Tensor, out_grad: Tensor
) -> tuple[list[Tensor], Tensor]:
    """Reverse-mode gradients for a batch.

    Returns (param_grads, input_grads) where param_grads follows the
    `params_as_list` ordering and is summed over the batch, and input_grads
    has the same shape as x.
    """
    _check_params(params)
    x = np.asarray(x, dtype=np.float64)
    out_grad = np.asarray(out_grad, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.sizes[0]:
        raise ValueError(f"input has shape {x.shape}, expected (n, {params.sizes[0]})")
    if out_grad.shape != (x.shape[0], params.sizes[-1]):
        raise ValueError(
            f"out_grad has shape {out_grad.shape}, expected ({x.shape[0]}, {params.sizes[-1]})"
        )
    require_finite(x, "net input")
    require_finite(out_grad, "out_grad")

    act, dact = _ACTIVATIONS[params.activation]
    last = params.n_layers() - 1

    # Forward, keeping post-activation values per layer.
    acts = [x]
    h = x
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w.T + b
        if i < last:
            h = act(h)
        acts.append(h)

    grads = zeros_like_grads(params)
    g = out_grad  # gradient w.r.t. the current layer's pre-activation (output layer is linear)
    for i in range(last, -1, -1):
        if i < last:
            g = g * dact(acts[i + 1])
        grads[2 * i] += g.T @ acts[i]
        grads[2 * i + 1] += g.sum(axis=0)
        g = g @ params.weights[i]
    return grads, g


def net_backward(params: NetParams, x: Tensor, out_grad: Tensor) -> tuple[list[Tensor], Tensor]:
    """Single-vector form of `net_backward_batch`."""
    x = np.asarray(x, dtype=np.float64)
    out_grad = np.asarray(out_grad, dtype=np.float64)
    if x.ndim != 1 or out_grad.ndim != 1:
        raise ValueError("net_backward expects vectors; use net_backward_batch for batches")
    grads, gin = net_backward_batch(params, x[None, :], out_grad[None, :])
    return grads, gin[0]


def save_checkpoint(path: str | Path, params: NetParams) -> None:
    """Write the documented binary layout. Deterministic bytes for equal params."""
    _check_params(params)
    name = params.activation.encode("ascii")
    parts = [MAGIC, struct.pack("<B", len(name)), name,
             struct.pack("<I", len(params.sizes)),
             struct.pack(f"<{len(params.sizes)}I", *params.sizes)]
    for w, b in zip(params.weights, params.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path: str | Path) -> NetParams:
    blob = Path(path).read_bytes()
    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(blob):
            raise CheckpointError(f"{path}: truncated at byte {off}")
        out = blob[off:off + n]
        off += n
        return out

    if take(len(MAGIC)) != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a network checkpoint")
    (name_len,) = struct.unpack("<B", take(1))
    activation = take(name_len).decode("ascii")
    if activation not in _ACTIVATIONS:
        raise CheckpointError(f"{path}: unknown activation {activation!r}")
    (n_sizes,) = struct.unpack("<I", take(4))
    if n_sizes < 2 or n_sizes > 64:
        raise CheckpointError(f"{path}: implausible layer count {n_sizes}")
    sizes = struct.unpack(f"<{n_sizes}I", take(4 * n_sizes))
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = np.frombuffer(take(8 * fan_in * fan_out), dtype="<f8").reshape(fan_out, fan_in)
        b = np.frombuffer(take(8 * fan_out), dtype="<f8")
        weights.append(w.astype(np.float64))
        biases.append(b.astype(np.float64))
    if off != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - off} trailing bytes")
    return NetParams(tuple(int(s) for s in sizes), weights, biases, activation)
