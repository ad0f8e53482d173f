"""
Learnable state of a run: per-agent diffusion policies with their target
copies, the shared critic, the temperature and one optimizer per component.
"""

from __future__ import annotations

import copy
import logging
import math
from typing import Dict, List, Sequence

import numpy as np

from omad.critic import CriticNetwork, ValueSupport, support_atoms
from omad.diffusion import NoiseSchedule, ScoreNetwork, ScorePolicy, cosine_schedule
from omad.envs.base import EnvSpec
from omad.errors import CheckpointError, ConfigError, ShapeError
from omad.ndiff.nn import Module, Parameter
from omad.ndiff.optim import Adam
from omad.trainer.config import TrainerConfig

logger = logging.getLogger(__name__)

TARGET_PREFIX = "target."


class TemperatureState(Module):
    """α = exp(log_alpha), so it can never reach zero or go negative."""

    def __init__(self, initial_alpha: float, target_entropy: float):
        if initial_alpha <= 0.0:
            raise ConfigError(f"initial temperature must be positive, got {initial_alpha}")
        self.log_alpha = Parameter(np.array([math.log(initial_alpha)]), "temperature.log_alpha")
        self.target_entropy = float(target_entropy)

    @property
    def alpha(self) -> float:
        return math.exp(float(self.log_alpha.data[0]))


def _adam(params: Sequence[Parameter], lr: float, config: TrainerConfig) -> Adam:
    return Adam(
        params, lr,
        beta1=config.adam_beta1, beta2=config.adam_beta2, clip_norm=config.grad_clip_norm,
    )


class AgentSet:
    def __init__(
        self,
        spec: EnvSpec,
        config: TrainerConfig,
        policies: Sequence[ScorePolicy],
        critic: CriticNetwork,
        temperature: TemperatureState,
    ):
        if len(policies) != spec.n_agents:
            raise ConfigError(f"{spec.n_agents} agents but {len(policies)} policies")
        self.spec = spec
        self.config = config
        self.policies: List[ScorePolicy] = list(policies)
        self.targets: List[ScorePolicy] = [copy.deepcopy(p).eval() for p in self.policies]
        self.critic = critic
        self.temperature = temperature
        self.actor_optim = _adam([p for pol in self.policies for p in pol.parameters()], config.actor_lr, config)
        self.critic_optim = _adam(critic.parameters(), config.critic_lr, config)
        self.alpha_optim = _adam(temperature.parameters(), config.alpha_lr, config)

    @classmethod
    def build(cls, spec: EnvSpec, config: TrainerConfig, rng: np.random.Generator) -> "AgentSet":
        schedule = cosine_schedule(config.denoise_steps, config.beta_min, config.beta_max, config.eta)
        policies = [
            ScorePolicy(
                i,
                ScoreNetwork(
                    spec.state_dim, spec.action_dim, rng, f"agent{i}.score",
                    hidden=config.actor_hidden,
                    time_dim=config.time_embedding_dim,
                    input_norm=config.actor_input_norm,
                    bn_momentum=config.bn_momentum,
                    bn_warmup_steps=config.bn_warmup_steps,
                ),
                schedule,
                spec.action_dim,
            )
            for i in range(spec.n_agents)
        ]
        support = support_atoms(config.v_max, config.n_atoms)
        critic = CriticNetwork(
            spec.state_dim, spec.joint_action_dim, support, rng,
            hidden=config.critic_hidden,
            input_norm=config.critic_input_norm,
            bn_momentum=config.bn_momentum,
            bn_warmup_steps=config.bn_warmup_steps,
        )
        temperature = TemperatureState(config.initial_alpha, config.target_entropy(spec.joint_action_dim))
        agents = cls(spec, config, policies, critic, temperature)
        logger.debug(
            "built %d policies (%d params each) and a critic with %d params",
            spec.n_agents, sum(p.data.size for p in policies[0].parameters()),
            sum(p.data.size for p in critic.parameters()),
        )
        return agents

    @property
    def schedule(self) -> NoiseSchedule:
        return self.policies[0].schedule

    @property
    def support(self) -> ValueSupport:
        return self.critic.support

    def snapshot(self) -> List[ScorePolicy]:
        """Evaluation-mode copies of the online policies, safe to use while training continues."""
        return [copy.deepcopy(p).eval() for p in self.policies]

    def state_dict(self) -> Dict[str, np.ndarray]:
        state: Dict[str, np.ndarray] = {}
        for policy in self.policies:
            state.update(policy.state_dict())
        for target in self.targets:
            state.update({TARGET_PREFIX + k: v for k, v in target.state_dict().items()})
        state.update(self.critic.state_dict())
        state.update(self.temperature.state_dict())
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        expected = set(self.state_dict())
        if set(state) != expected:
            missing = sorted(expected - set(state))[:3]
            extra = sorted(set(state) - expected)[:3]
            raise CheckpointError(f"checkpoint does not fit this agent set (missing {missing}, unexpected {extra})")
        try:
            for policy in self.policies:
                policy.load_state_dict(state)
            for target in self.targets:
                target.load_state_dict({k[len(TARGET_PREFIX):]: v for k, v in state.items() if k.startswith(TARGET_PREFIX)})
            self.critic.load_state_dict(state)
            self.temperature.load_state_dict(state)
        except ShapeError as exc:
            raise CheckpointError(f"checkpoint does not fit this agent set: {exc}") from exc


def update_targets(agents: AgentSet, rho: float) -> None:
    """θ' <- ρ θ' + (1 - ρ) θ for parameters and batch-norm statistics; ρ = 0 is a hard copy."""
    if not 0.0 <= rho <= 1.0:
        raise ConfigError(f"rho must lie in [0, 1], got {rho}")
    for online, target in zip(agents.policies, agents.targets):
        src, dst = online.state_dict(), target.state_dict()
        if src.keys() != dst.keys():
            raise ShapeError(f"agent {online.agent_id}: target network has a different layout")
        blended = {}
        for key, value in src.items():
            if value.shape != dst[key].shape:
                raise ShapeError(f"{key}: online {value.shape} vs target {dst[key].shape}")
            if rho == 0.0 or key.endswith(".step_count"):
                blended[key] = value
            else:
                blended[key] = rho * dst[key] + (1.0 - rho) * value
        target.load_state_dict(blended)
