"""
Per-agent denoising diffusion policies.

Grid convention: the step between a_{h-1} and a_h carries beta_h in both
directions. Forward (noising) a_h = (1 - beta_h δ) a_{h-1} + eps_h and reverse
(denoising) a_{h-1} = a_h + (beta_h a_h + 2 η² beta_h f(a_h, s, h/H)) δ + xi_h,
with eps_h, xi_h ~ N(0, 2 η² beta_h δ I). A trajectory is stored as
a_H, a_{H-1}, ..., a_0 together with the draws that produced it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from omad.errors import ConfigError, NonFiniteError, ScheduleMismatchError, ShapeError
from omad.ndiff import tensor as T
from omad.ndiff.nn import MLP, BatchNorm, Module, fourier_time_embedding
from omad.ndiff.tensor import Tensor

ArrayOrTensor = Union[np.ndarray, Tensor]


@dataclass(frozen=True)
class NoiseSchedule:
    beta: Tuple[float, ...]
    delta: float
    eta: float

    def __post_init__(self):
        if len(self.beta) < 1:
            raise ConfigError("noise schedule needs at least one denoising step")
        if self.eta <= 0.0:
            raise ConfigError(f"diffusion scale eta must be positive, got {self.eta}")
        b = np.asarray(self.beta)
        if np.any(b <= 0.0) or np.any(np.diff(b) < 0.0):
            raise ConfigError("beta must be positive and non-decreasing")
        if np.any(b * self.delta >= 1.0):
            raise ConfigError("beta * delta must stay below 1 on every step")

    @property
    def H(self) -> int:
        return len(self.beta)

    def beta_at(self, h: int) -> float:
        """beta_h for grid step h in 1..H."""
        if not 1 <= h <= self.H:
            raise ConfigError(f"grid step {h} outside 1..{self.H}")
        return self.beta[h - 1]

    def variance(self, h: int) -> float:
        """Transition variance 2 η² beta_h δ, shared by both directions."""
        return 2.0 * self.eta ** 2 * self.beta_at(h) * self.delta

    def time(self, h: int) -> float:
        return h / self.H


def cosine_schedule(H: int, beta_min: float, beta_max: float, eta: float = 1.0) -> NoiseSchedule:
    if H < 1:
        raise ConfigError(f"denoising steps must be >= 1, got {H}")
    if not 0.0 < beta_min < beta_max:
        raise ConfigError(f"need 0 < beta_min < beta_max, got {beta_min}, {beta_max}")
    delta = 1.0 / H
    if beta_max * delta >= 1.0:
        raise ConfigError(f"beta_max * delta = {beta_max * delta} must be < 1")
    h = np.arange(1, H + 1)
    beta = beta_min + (beta_max - beta_min) * 0.5 * (1.0 - np.cos(math.pi * (h - 0.5) / H))
    return NoiseSchedule(tuple(float(b) for b in beta), delta, float(eta))


class ScoreNetwork(Module):
    """f_θ(a_h, s, t): optional batch norm over [s, a_h], then Fourier(t), then a GeLU MLP."""

    def __init__(
        self,
        state_dim: int,
        action_dim: int,
        rng: np.random.Generator,
        name: str,
        hidden: Sequence[int] = (64, 64),
        time_dim: int = 16,
        input_norm: bool = True,
        bn_momentum: float = 0.99,
        bn_warmup_steps: int = 0,
    ):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.time_dim = time_dim
        self.input_norm = None
        if input_norm:
            self.input_norm = BatchNorm(
                state_dim + action_dim, f"{name}.bn_in", bn_momentum, bn_warmup_steps, deferred=True,
            )
        self.mlp = MLP(
            [state_dim + action_dim + time_dim, *hidden, action_dim], "gelu", rng, f"{name}.mlp",
        )

    def __call__(self, a_h: Tensor, s: ArrayOrTensor, t: float) -> Tensor:
        x = T.concat([s, a_h], axis=1)
        if self.input_norm is not None:
            x = self.input_norm(x)
        emb = np.broadcast_to(fourier_time_embedding(t, self.time_dim), (x.shape[0], self.time_dim))
        return self.mlp(T.concat([x, emb], axis=1))


class StationaryScore(Module):
    """The exact score -a/η² of the noising process's stationary law N(0, η² I)."""

    def __init__(self, eta: float):
        self.eta = eta

    def __call__(self, a_h: Tensor, s: ArrayOrTensor, t: float) -> Tensor:
        return a_h * (-1.0 / self.eta ** 2)


class ScorePolicy(Module):
    """Agent ``agent_id``'s diffusion policy: a score network on a noise schedule."""

    def __init__(self, agent_id: int, network: Module, schedule: NoiseSchedule, action_dim: int):
        self.agent_id = agent_id
        self.network = network
        self.schedule = schedule
        self.action_dim = action_dim

    def score(self, a_h: Tensor, s: ArrayOrTensor, h: int) -> Tensor:
        out = self.network(a_h, s, self.schedule.time(h))
        if out.shape != a_h.shape:
            raise ShapeError(f"agent {self.agent_id}: score shape {out.shape} != action shape {a_h.shape}")
        if not np.all(np.isfinite(out.data)):
            raise NonFiniteError(
                f"agent {self.agent_id}: non-finite score at grid step {h}",
                {"agent": self.agent_id, "step": h, "max_abs_input": float(np.abs(a_h.data).max())},
            )
        return out


@dataclass
class DiffusionTrajectory:
    state: np.ndarray
    chain: List[Tensor]           # a_H, a_{H-1}, ..., a_0
    means: List[Tensor]           # reverse means of a_{H-1}, ..., a_0
    noises: List[np.ndarray]      # xi_H, ..., xi_1 in order of use
    prior_draw: np.ndarray
    schedule: NoiseSchedule

    @property
    def action(self) -> Tensor:
        return self.chain[-1]

    def actions(self) -> np.ndarray:
        return self.chain[-1].data


def _as_batch(x: ArrayOrTensor) -> Tuple[Tensor, bool]:
    x = T.as_tensor(x)
    if x.ndim == 1:
        return T.reshape(x, (1, x.shape[0])), True
    return x, False


def sample_prior(action_dim: int, eta: float, rng: np.random.Generator, batch: Optional[int] = None) -> np.ndarray:
    if eta < 0.0:
        raise ConfigError(f"prior scale must be non-negative, got {eta}")
    shape = (action_dim,) if batch is None else (batch, action_dim)
    return rng.normal(0.0, eta, shape)


def forward_step(
    a_h: ArrayOrTensor,
    h: int,
    schedule: NoiseSchedule,
    rng: Optional[np.random.Generator] = None,
    noise: Optional[np.ndarray] = None,
) -> ArrayOrTensor:
    """Noise a_h into a_{h+1} using the beta of grid step h+1."""
    beta = schedule.beta_at(h + 1)
    if noise is None:
        if rng is None:
            raise ConfigError("forward_step needs either rng or an explicit noise draw")
        noise = rng.normal(0.0, math.sqrt(schedule.variance(h + 1)), np.shape(a_h.data if isinstance(a_h, Tensor) else a_h))
    return (1.0 - beta * schedule.delta) * a_h + noise


def reverse_mean(a_h: Tensor, s: ArrayOrTensor, h: int, policy: ScorePolicy) -> Tensor:
    sched = policy.schedule
    beta = sched.beta_at(h)
    f = policy.score(a_h, s, h)
    return a_h + (beta * a_h + (2.0 * sched.eta ** 2 * beta) * f) * sched.delta


def reverse_step(a_h: ArrayOrTensor, s: ArrayOrTensor, h: int, policy: ScorePolicy, noise: ArrayOrTensor) -> Tensor:
    """Denoise a_h into a_{h-1}; ``noise`` is the xi_h draw, held constant."""
    a, squeeze = _as_batch(a_h)
    states, _ = _as_batch(s)
    xi = np.asarray(noise.data if isinstance(noise, Tensor) else noise, dtype=np.float64).reshape(a.shape)
    out = reverse_mean(a, states, h, policy) + xi
    return T.reshape(out, (out.shape[1],)) if squeeze else out


def sample_action(
    s: ArrayOrTensor,
    policy: ScorePolicy,
    rng: Optional[np.random.Generator] = None,
    prior_draw: Optional[np.ndarray] = None,
    noises: Optional[Sequence[np.ndarray]] = None,
) -> DiffusionTrajectory:
    """Draw a_H from the prior and denoise it H times; a_0 is the action."""
    states, _ = _as_batch(s)
    sched = policy.schedule
    batch, d = states.shape[0], policy.action_dim
    if (prior_draw is None or noises is None) and rng is None:
        raise ConfigError("sample_action needs rng unless prior_draw and noises are both given")
    if prior_draw is None:
        prior_draw = sample_prior(d, sched.eta, rng, batch=batch)
    prior_draw = np.asarray(prior_draw, dtype=np.float64).reshape(batch, d)
    if noises is None:
        noises = [rng.normal(0.0, math.sqrt(sched.variance(h)), (batch, d)) for h in range(sched.H, 0, -1)]
    if len(noises) != sched.H:
        raise ShapeError(f"expected {sched.H} noise draws, got {len(noises)}")
    noises = [np.asarray(xi, dtype=np.float64).reshape(batch, d) for xi in noises]

    a = Tensor(prior_draw)
    chain, means = [a], []
    for k, h in enumerate(range(sched.H, 0, -1)):
        mean = reverse_mean(a, states, h, policy)
        a = mean + noises[k]
        means.append(mean)
        chain.append(a)
    if not np.all(np.isfinite(a.data)):
        raise NonFiniteError(
            f"agent {policy.agent_id}: non-finite sampled action",
            {"agent": policy.agent_id, "max_abs_prior": float(np.abs(prior_draw).max())},
        )
    return DiffusionTrajectory(states.data, chain, means, noises, prior_draw, sched)


def replay_trajectory(traj: DiffusionTrajectory, policy: ScorePolicy) -> DiffusionTrajectory:
    return sample_action(traj.state, policy, prior_draw=traj.prior_draw, noises=traj.noises)


def gaussian_log_density(x: ArrayOrTensor, mean: ArrayOrTensor, var: float) -> Tensor:
    """log N(x; mean, var I), summed over the last axis."""
    if var <= 0.0:
        raise ConfigError(f"variance must be positive, got {var}")
    x = T.as_tensor(x)
    d = x.shape[-1] if x.ndim else 1
    diff = x - mean
    sq = (diff * diff).sum(axis=-1) if x.ndim else diff * diff
    return sq * (-0.5 / var) - 0.5 * d * math.log(2.0 * math.pi * var)


def elbo_entropy(traj: DiffusionTrajectory, policy: ScorePolicy) -> Tensor:
    """
    Single-sample entropy lower bound, one value per batch row:
    sum_h log q_fwd(a_h | a_{h-1}) - log N(a_H; 0, η² I) - sum_h log q_rev(a_{h-1} | a_h, s).
    """
    if traj.schedule != policy.schedule:
        raise ScheduleMismatchError(f"agent {policy.agent_id}: trajectory was sampled under another schedule")
    sched = traj.schedule
    H = sched.H
    l = -gaussian_log_density(traj.chain[0], 0.0, sched.eta ** 2)
    for h in range(1, H + 1):
        a_h = traj.chain[H - h]
        a_prev = traj.chain[H - h + 1]
        var = sched.variance(h)
        shrink = 1.0 - sched.beta_at(h) * sched.delta
        l = l + gaussian_log_density(a_h, shrink * a_prev, var)
        l = l - gaussian_log_density(a_prev, traj.means[H - h], var)
    return l


def joint_elbo(trajectories: Sequence[DiffusionTrajectory], policies: Sequence[ScorePolicy]) -> Tensor:
    """Sum of per-agent bounds; the joint policy factorizes over agents."""
    total = elbo_entropy(trajectories[0], policies[0])
    for traj, policy in zip(trajectories[1:], policies[1:]):
        total = total + elbo_entropy(traj, policy)
    return total
