from .net import (
    NetParams,
    clone_params,
    load_checkpoint,
    net_backward,
    net_backward_batch,
    net_forward,
    net_forward_batch,
    net_init,
    params_as_list,
    save_checkpoint,
    zeros_like_grads,
)
from .optim import OptState, opt_init, opt_step
from .rng import RandomSource
from .stats import finite_diff_grad, gaussian_logpdf
from .tensor import Tensor, require_finite, require_vector, tensor, zeros

__all__ = [
    "NetParams",
    "OptState",
    "RandomSource",
    "Tensor",
    "clone_params",
    "finite_diff_grad",
    "gaussian_logpdf",
    "load_checkpoint",
    "net_backward",
    "net_backward_batch",
    "net_forward",
    "net_forward_batch",
    "net_init",
    "opt_init",
    "opt_step",
    "params_as_list",
    "require_finite",
    "require_vector",
    "save_checkpoint",
    "tensor",
    "zeros",
    "zeros_like_grads",
]
