"""Adam with global gradient-norm clipping."""

from __future__ import annotations

import math
from typing import Dict, Iterable, List

import numpy as np

from omad.errors import ConfigError, NonFiniteError
from omad.ndiff.nn import Parameter


def global_grad_norm(params: Iterable[Parameter]) -> float:
    """L2 norm over all gradients; summed exactly so ordering cannot matter."""
    return math.sqrt(math.fsum(float(np.sum(p.grad * p.grad)) for p in params))


class Adam:
    """
    Adam over a fixed parameter set, traversed in name order.

    Moments are keyed by parameter name; ``t`` advances by one per step.
    """

    def __init__(
        self,
        params: Iterable[Parameter],
        lr: float,
        beta1: float = 0.5,
        beta2: float = 0.999,
        eps: float = 1e-8,
        clip_norm: float = 1.0,
    ):
        self.params: List[Parameter] = sorted(params, key=lambda p: p.name)
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ConfigError("optimizer parameters must have unique names")
        if lr <= 0.0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ConfigError(f"Adam betas must lie in [0, 1), got {beta1}, {beta2}")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.t = 0
        self.m: Dict[str, np.ndarray] = {p.name: np.zeros_like(p.data) for p in self.params}
        self.v: Dict[str, np.ndarray] = {p.name: np.zeros_like(p.data) for p in self.params}

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> float:
        """Clip, update and zero the gradients. Returns the pre-clip global norm."""
        return adam_step(self.params, self, self.clip_norm)


def adam_step(params: List[Parameter], state: Adam, clip_norm: float) -> float:
    bad = {p.name: float(np.abs(p.grad).max(initial=0.0)) for p in params if not np.all(np.isfinite(p.grad))}
    if bad:
        raise NonFiniteError(
            f"non-finite gradient in {len(bad)} parameter(s); update skipped",
            {"parameters": sorted(bad), "grad_norms": {p.name: float(np.linalg.norm(p.grad)) for p in params}},
        )
    norm = global_grad_norm(params)
    scale = 1.0
    if clip_norm and clip_norm > 0.0 and norm > clip_norm:
        scale = clip_norm / norm
    state.t += 1
    bias1 = 1.0 - state.beta1 ** state.t
    bias2 = 1.0 - state.beta2 ** state.t
    for p in params:
        g = p.grad * scale
        m = state.m[p.name]
        v = state.v[p.name]
        m[...] = state.beta1 * m + (1.0 - state.beta1) * g
        v[...] = state.beta2 * v + (1.0 - state.beta2) * g * g
        p.data -= state.lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)
        p.zero_grad()
    return norm
