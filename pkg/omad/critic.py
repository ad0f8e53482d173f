"""
Centralized categorical distributional critic.

The critic sees the global state and the joint action, batch-normalizes the
concatenation and outputs a softmax over a fixed atom support. There is no
target critic: the bootstrap side is evaluated in the same forward pass as the
online side so both share batch statistics, and is then cut from the graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from omad.errors import ConfigError, ShapeError
from omad.ndiff import tensor as T
from omad.ndiff.nn import MLP, BatchNorm, Module
from omad.ndiff.tensor import Tensor

LOG_FLOOR = math.log(1e-12)


@dataclass(frozen=True)
class ValueSupport:
    v_max: float
    n_atoms: int
    atoms: np.ndarray = field(repr=False, compare=False)

    @property
    def v_min(self) -> float:
        return -self.v_max

    @property
    def gap(self) -> float:
        return (self.v_max - self.v_min) / (self.n_atoms - 1)


def support_atoms(v_max: float, n_atoms: int) -> ValueSupport:
    if n_atoms < 2:
        raise ConfigError(f"need at least 2 atoms, got {n_atoms}")
    if v_max <= 0.0:
        raise ConfigError(f"v_max must be positive, got {v_max}")
    atoms = np.linspace(-v_max, v_max, n_atoms)
    # exact symmetry: negate-and-reverse maps the grid onto itself
    atoms = 0.5 * (atoms - atoms[::-1])
    return ValueSupport(float(v_max), int(n_atoms), atoms)


class CriticNetwork(Module):
    """Z_φ(s, a): BN over [s, a], ReLU MLP with BN between hidden layers, softmax head."""

    def __init__(
        self,
        state_dim: int,
        action_dim: int,
        support: ValueSupport,
        rng: np.random.Generator,
        hidden: Sequence[int] = (256, 256),
        input_norm: bool = True,
        bn_momentum: float = 0.99,
        bn_warmup_steps: int = 0,
        name: str = "critic",
    ):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.support = support
        self.input_norm = None
        if input_norm:
            self.input_norm = BatchNorm(state_dim + action_dim, f"{name}.bn_in", bn_momentum, bn_warmup_steps)
        self.mlp = MLP(
            [state_dim + action_dim, *hidden, support.n_atoms], "relu", rng, f"{name}.mlp",
            hidden_norm=True, bn_momentum=bn_momentum, bn_warmup_steps=bn_warmup_steps,
        )

    def logits(self, s, a) -> Tensor:
        s, a = T.as_tensor(s), T.as_tensor(a)
        if s.ndim != 2 or a.ndim != 2 or s.shape[0] != a.shape[0]:
            raise ShapeError(f"critic inputs must be batched alike, got {s.shape} and {a.shape}")
        if s.shape[1] != self.state_dim or a.shape[1] != self.action_dim:
            raise ShapeError(
                f"critic expects state {self.state_dim} / action {self.action_dim}, got {s.shape[1]} / {a.shape[1]}"
            )
        x = T.concat([s, a], axis=1)
        if self.input_norm is not None:
            x = self.input_norm(x)
        return self.mlp(x)

    def distribution(self, s, a) -> Tensor:
        return T.softmax(self.logits(s, a), axis=-1)

    def q_values(self, s, a) -> Tensor:
        return q_mean(self.distribution(s, a), self.support)


def critic_forward_pair(critic: CriticNetwork, s, a, s_next, a_next) -> Tuple[Tensor, Tensor]:
    """One forward pass over [(s, a); (s', a')] so batch statistics are shared."""
    s, a, s_next, a_next = (T.as_tensor(x) for x in (s, a, s_next, a_next))
    if s.shape != s_next.shape or a.shape != a_next.shape:
        raise ShapeError(f"pair batches differ: {s.shape}/{s_next.shape}, {a.shape}/{a_next.shape}")
    batch = s.shape[0]
    probs = critic.distribution(T.concat([s, s_next], axis=0), T.concat([a, a_next], axis=0))
    return probs[:batch], probs[batch:]


def q_mean(dist, support: ValueSupport) -> Tensor:
    """Expected value Σ_j p_j z_j (per row for a batch)."""
    dist = T.as_tensor(dist)
    return (dist * support.atoms).sum(axis=-1)


def bellman_target(
    r_team: np.ndarray,
    done: np.ndarray,
    next_probs: np.ndarray,
    support: ValueSupport,
    gamma: float,
    alpha: float,
    elbo_sum: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """Shift each atom to r + (1 - done) γ (z_j + α Σ l); probabilities ride along."""
    r = np.asarray(r_team, dtype=np.float64).reshape(-1, 1)
    cont = 1.0 - np.asarray(done, dtype=np.float64).reshape(-1, 1)
    bonus = alpha * np.asarray(elbo_sum, dtype=np.float64).reshape(-1, 1)
    probs = np.asarray(next_probs, dtype=np.float64).reshape(r.shape[0], support.n_atoms)
    shifted = r + cont * gamma * (support.atoms[None, :] + bonus)
    return shifted, probs.copy()


def project_to_support(shifted: np.ndarray, probs: np.ndarray, support: ValueSupport) -> np.ndarray:
    """Split each shifted atom's mass between its two neighbouring support atoms."""
    shifted = np.atleast_2d(np.asarray(shifted, dtype=np.float64))
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    if shifted.shape != probs.shape:
        raise ShapeError(f"shifted atoms {shifted.shape} and probabilities {probs.shape} differ")
    pos = (np.clip(shifted, support.v_min, support.v_max) - support.v_min) / support.gap
    nearest = np.rint(pos)
    pos = np.where(np.abs(pos - nearest) < 1e-9, nearest, pos)
    pos = np.clip(pos, 0.0, support.n_atoms - 1)
    lower = np.floor(pos).astype(int)
    upper = np.ceil(pos).astype(int)
    frac = pos - lower
    rows = np.repeat(np.arange(shifted.shape[0])[:, None], shifted.shape[1], axis=1)
    out = np.zeros((shifted.shape[0], support.n_atoms))
    np.add.at(out, (rows, lower), probs * np.where(lower == upper, 1.0, 1.0 - frac))
    np.add.at(out, (rows, upper), probs * np.where(lower == upper, 0.0, frac))
    return out


def critic_loss(pred_probs: Tensor, projected_target: np.ndarray, xi: float) -> Tensor:
    """Batch mean of -Σ target log pred + ξ H(pred), log floored at log(1e-12)."""
    pred = T.as_tensor(pred_probs)
    target = np.asarray(projected_target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} and target {target.shape} differ")
    log_pred = T.clip_min(T.log(T.clip_min(pred, 1e-300)), LOG_FLOOR)
    cross_entropy = -(log_pred * target).sum(axis=-1)
    entropy = -(pred * log_pred).sum(axis=-1)
    return (cross_entropy + xi * entropy).mean()
