"""Minimal float64 numerics with reverse-mode differentiation."""

from omad.ndiff.checkpoint import load_checkpoint, save_checkpoint
from omad.ndiff.nn import (
    MLP,
    BatchNorm,
    Linear,
    Module,
    Parameter,
    batchnorm_apply,
    fourier_time_embedding,
    mlp_forward,
)
from omad.ndiff.optim import Adam, adam_step, global_grad_norm
from omad.ndiff.tensor import (
    Tensor,
    as_tensor,
    backward,
    clip_min,
    concat,
    gelu,
    log_softmax,
    no_grad,
    relu,
    softmax,
    stop_gradient,
)

__all__ = [
    "Adam",
    "BatchNorm",
    "Linear",
    "MLP",
    "Module",
    "Parameter",
    "Tensor",
    "adam_step",
    "as_tensor",
    "backward",
    "batchnorm_apply",
    "clip_min",
    "concat",
    "fourier_time_embedding",
    "gelu",
    "global_grad_norm",
    "load_checkpoint",
    "log_softmax",
    "mlp_forward",
    "no_grad",
    "relu",
    "save_checkpoint",
    "softmax",
    "stop_gradient",
]
