"""
Network building blocks: parameters, affine layers, MLPs, batch
normalization and the Fourier time embedding.
"""

from __future__ import annotations

import math
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from omad.errors import ConfigError, ShapeError
from omad.ndiff import tensor as T
from omad.ndiff.tensor import Tensor

ACTIVATIONS = {"relu": T.relu, "gelu": T.gelu}


class Parameter(Tensor):
    """A learnable leaf; ``name`` is its unique handle in checkpoints and optimizers."""

    def __init__(self, value, name: str):
        super().__init__(value, requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


class Module:
    """Walks its attributes to find parameters, buffers and sub-modules."""

    training = True

    def _children(self) -> Iterator[Tuple[str, object]]:
        for key, value in vars(self).items():
            if isinstance(value, (Parameter, Module)):
                yield key, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, (Parameter, Module)):
                        yield f"{key}.{i}", item

    def parameters(self) -> List[Parameter]:
        found: List[Parameter] = []
        for _, child in self._children():
            if isinstance(child, Parameter):
                found.append(child)
            else:
                found.extend(child.parameters())
        return found

    def buffers(self) -> Dict[str, np.ndarray]:
        found: Dict[str, np.ndarray] = {}
        for _, child in self._children():
            if isinstance(child, Module):
                found.update(child.buffers())
        return found

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {p.name: p.data.copy() for p in self.parameters()}
        state.update({k: v.copy() for k, v in self.buffers().items()})
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        for p in self.parameters():
            if p.name not in state:
                raise ShapeError(f"missing parameter {p.name!r}")
            value = np.asarray(state[p.name], dtype=np.float64)
            if value.shape != p.shape:
                raise ShapeError(f"{p.name}: expected {p.shape}, got {value.shape}")
            p.data[...] = value
        for _, child in self._children():
            if isinstance(child, Module):
                child._load_buffers(state)

    def _load_buffers(self, state: Dict[str, np.ndarray]) -> None:
        for _, child in self._children():
            if isinstance(child, Module):
                child._load_buffers(state)

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for _, child in self._children():
            if isinstance(child, Module):
                child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def commit_statistics(self) -> int:
        """Commit every deferred batch norm below this module; returns how many blended."""
        return sum(child.commit_statistics() for _, child in self._children() if isinstance(child, Module))


class Linear(Module):
    """y = x W + b, initialised uniform in ±1/√fan_in."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, name: str):
        if in_features < 1 or out_features < 1:
            raise ConfigError(f"{name}: layer sizes must be positive, got {in_features}x{out_features}")
        bound = 1.0 / math.sqrt(in_features)
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(rng.uniform(-bound, bound, (in_features, out_features)), f"{name}.weight")
        self.bias = Parameter(rng.uniform(-bound, bound, (out_features,)), f"{name}.bias")

    def __call__(self, x: Tensor) -> Tensor:
        return T.matmul(x, self.weight) + self.bias


class BatchNorm(Module):
    """
    Per-feature batch normalization with learnable scale/shift.

    Running statistics are blended with a momentum that ramps linearly from
    0.5 to ``momentum`` over the first ``warmup_steps`` blends. A ``deferred``
    norm only accumulates batch moments in training mode; :meth:`commit` blends
    their average once, so a network called H times per gradient step still
    advances one step.
    """

    def __init__(
        self,
        features: int,
        name: str,
        momentum: float = 0.99,
        warmup_steps: int = 0,
        eps: float = 1e-5,
        deferred: bool = False,
    ):
        if not 0.0 < momentum < 1.0:
            raise ConfigError(f"{name}: momentum must lie in (0, 1), got {momentum}")
        self.name = name
        self.features = features
        self.momentum = momentum
        self.warmup_steps = int(warmup_steps)
        self.eps = eps
        self.deferred = deferred
        self.step_count = 0
        self.running_mean = np.zeros(features)
        self.running_var = np.ones(features)
        self._pending = [np.zeros(features), np.zeros(features), 0]
        self.scale = Parameter(np.ones(features), f"{name}.scale")
        self.shift = Parameter(np.zeros(features), f"{name}.shift")

    def current_momentum(self) -> float:
        if self.warmup_steps <= 0 or self.step_count >= self.warmup_steps:
            return self.momentum
        frac = self.step_count / self.warmup_steps
        return 0.5 + (self.momentum - 0.5) * frac

    def __call__(self, x: Tensor) -> Tensor:
        return batchnorm_apply(x, self)

    def blend(self, mean: np.ndarray, var: np.ndarray) -> None:
        m = self.current_momentum()
        self.running_mean[...] = m * self.running_mean + (1.0 - m) * mean
        self.running_var[...] = m * self.running_var + (1.0 - m) * var
        self.step_count += 1

    def commit(self) -> bool:
        """Blend the moments accumulated since the last commit. False when there were none."""
        mean_sum, var_sum, calls = self._pending
        if calls == 0:
            return False
        self.blend(mean_sum / calls, var_sum / calls)
        self._pending = [np.zeros(self.features), np.zeros(self.features), 0]
        return True

    def commit_statistics(self) -> int:
        return int(self.commit())

    def buffers(self) -> Dict[str, np.ndarray]:
        return {
            f"{self.name}.running_mean": self.running_mean,
            f"{self.name}.running_var": self.running_var,
            f"{self.name}.step_count": np.array([float(self.step_count)]),
        }

    def _load_buffers(self, state: Dict[str, np.ndarray]) -> None:
        for key in ("running_mean", "running_var"):
            full = f"{self.name}.{key}"
            if full not in state:
                raise ShapeError(f"missing buffer {full!r}")
            getattr(self, key)[...] = state[full]
        count = state.get(f"{self.name}.step_count")
        if count is not None:
            self.step_count = int(np.asarray(count).reshape(-1)[0])


def batchnorm_apply(x: Tensor, state: BatchNorm) -> Tensor:
    x = T.as_tensor(x)
    if x.ndim != 2 or x.shape[1] != state.features:
        raise ShapeError(f"{state.name}: expected (batch, {state.features}), got {x.shape}")
    if state.training:
        if x.shape[0] < 2:
            raise ShapeError(f"{state.name}: training mode needs batch size >= 2, got {x.shape[0]}")
        mean = x.mean(axis=0, keepdims=True)
        centered = x - mean
        var = (centered * centered).mean(axis=0, keepdims=True)
        normed = centered / T.sqrt(var + state.eps)
        if state.deferred:
            state._pending[0] += mean.data[0]
            state._pending[1] += var.data[0]
            state._pending[2] += 1
        else:
            state.blend(mean.data[0], var.data[0])
    else:
        normed = (x - state.running_mean) / np.sqrt(state.running_var + state.eps)
    return normed * state.scale + state.shift


def mlp_forward(
    x: Tensor,
    layers: Sequence[Linear],
    activation: str,
    norms: Optional[Sequence[BatchNorm]] = None,
) -> Tensor:
    """Affine layers with ``activation`` between them; the last layer is linear.

    When ``norms`` is given, hidden layer ``k`` is followed by ``norms[k]``
    before the activation.
    """
    if activation not in ACTIVATIONS:
        raise ConfigError(f"unknown activation {activation!r}")
    x = T.as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"mlp input must be (batch, features), got {x.shape}")
    if x.shape[1] != layers[0].in_features:
        raise ShapeError(f"mlp input has {x.shape[1]} features, first layer expects {layers[0].in_features}")
    act = ACTIVATIONS[activation]
    h = x
    for k, layer in enumerate(layers):
        h = layer(h)
        if k < len(layers) - 1:
            if norms is not None:
                h = norms[k](h)
            h = act(h)
    return h


class MLP(Module):
    def __init__(
        self,
        sizes: Sequence[int],
        activation: str,
        rng: np.random.Generator,
        name: str,
        hidden_norm: bool = False,
        bn_momentum: float = 0.99,
        bn_warmup_steps: int = 0,
    ):
        if len(sizes) < 2:
            raise ConfigError(f"{name}: an MLP needs at least input and output sizes")
        if activation not in ACTIVATIONS:
            raise ConfigError(f"{name}: unknown activation {activation!r}")
        self.activation = activation
        self.layers = [
            Linear(sizes[k], sizes[k + 1], rng, f"{name}.l{k}") for k in range(len(sizes) - 1)
        ]
        self.norms = None
        if hidden_norm:
            self.norms = [
                BatchNorm(sizes[k + 1], f"{name}.bn{k}", bn_momentum, bn_warmup_steps)
                for k in range(len(sizes) - 2)
            ]

    @property
    def in_features(self) -> int:
        return self.layers[0].in_features

    @property
    def out_features(self) -> int:
        return self.layers[-1].out_features

    def __call__(self, x: Tensor) -> Tensor:
        return mlp_forward(x, self.layers, self.activation, self.norms)


def fourier_frequencies(dim: int) -> np.ndarray:
    return np.geomspace(1.0, 1000.0, dim // 2)


def fourier_time_embedding(t: float, dim: int) -> np.ndarray:
    """[sin(2π f_k t), cos(2π f_k t)] with dim/2 frequencies geometric in [1, 1000]."""
    if dim < 2 or dim % 2:
        raise ConfigError(f"time embedding dimension must be even and >= 2, got {dim}")
    if not 0.0 <= t <= 1.0:
        raise ConfigError(f"embedding time must lie in [0, 1], got {t}")
    phase = 2.0 * math.pi * fourier_frequencies(dim) * t
    return np.concatenate([np.sin(phase), np.cos(phase)])
