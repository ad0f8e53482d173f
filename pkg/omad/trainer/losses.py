"""Policy and temperature objectives."""

from __future__ import annotations

from typing import Callable, Dict, Sequence, Tuple

import numpy as np

from omad.diffusion import DiffusionTrajectory, ScorePolicy, gaussian_log_density, joint_elbo, sample_action
from omad.errors import ConfigError, NonFiniteError
from omad.ndiff import tensor as T
from omad.ndiff.tensor import Tensor
from omad.trainer.agents import TemperatureState

QFunction = Callable[[np.ndarray, Tensor], Tensor]


def sample_joint(
    states: np.ndarray, policies: Sequence[ScorePolicy], rng: np.random.Generator,
) -> Tuple[Sequence[DiffusionTrajectory], Tensor]:
    """One reparameterized trajectory per agent; returns them and the concatenated joint action."""
    trajectories = [sample_action(states, policy, rng) for policy in policies]
    return trajectories, T.concat([traj.action for traj in trajectories], axis=1)


def synchronized_policy_loss(
    states: np.ndarray,
    policies: Sequence[ScorePolicy],
    q_fn: QFunction,
    alpha: float,
    rng: np.random.Generator,
) -> Tuple[Tensor, Dict[str, np.ndarray]]:
    """
    Batch mean of  -Σ_i l_i(s) - Q(s, a_0)/α  over reparameterized joint samples.

    -l_i expands to log N(a_H; 0, η²) + Σ_h [log q_rev - log q_fwd], so the
    value matches the soft policy-improvement objective without log Z(s). The
    prior term carries no gradient since a_H does not depend on θ.
    """
    if alpha <= 0.0:
        raise ConfigError(f"temperature must be positive, got {alpha}")
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    trajectories, joint_action = sample_joint(states, policies, rng)
    elbo = joint_elbo(trajectories, policies)
    q = q_fn(states, joint_action)
    loss = (-elbo - q * (1.0 / alpha)).mean()
    prior = sum(
        gaussian_log_density(traj.chain[0].data, 0.0, traj.schedule.eta ** 2).data for traj in trajectories
    )
    diagnostics = {
        "joint_elbo": elbo.data.copy(),
        "q": q.data.copy(),
        "prior_log_density": np.asarray(prior),
        "actions": joint_action.data.copy(),
    }
    if not np.isfinite(loss.item()):
        raise NonFiniteError(
            "policy loss is not finite",
            {"elbo_mean": float(np.mean(elbo.data)), "q_mean": float(np.mean(q.data)), "alpha": alpha},
        )
    return loss, diagnostics


def temperature_loss(temperature: TemperatureState, elbo_mean: float) -> Tensor:
    """α (mean joint ELBO - H_target): descent raises α while the bound sits below target."""
    residual = float(elbo_mean) - temperature.target_entropy
    return (T.exp(temperature.log_alpha) * residual).sum()
