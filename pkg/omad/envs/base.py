"""Shared environment description types."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Tuple

import numpy as np

from omad.errors import ConfigError


@dataclass(frozen=True)
class EnvSpec:
    name: str
    n_agents: int
    state_dim: int
    action_dim: int
    episode_length: int = 25
    action_bound: float = 1.0
    mass: float = 1.0
    damping: float = 0.9
    dt: float = 0.1
    world_bound: float = 2.0

    def __post_init__(self):
        if self.episode_length < 1:
            raise ConfigError(f"{self.name}: episode_length must be >= 1")
        if self.n_agents < 1 or self.action_dim < 1:
            raise ConfigError(f"{self.name}: need at least one agent and one action dimension")
        if self.action_bound <= 0.0:
            raise ConfigError(f"{self.name}: action box [-b, b] needs b > 0")

    @property
    def joint_action_dim(self) -> int:
        return self.n_agents * self.action_dim

    def clip_action(self, joint_action: np.ndarray) -> np.ndarray:
        a = np.asarray(joint_action, dtype=np.float64).reshape(self.joint_action_dim)
        return np.clip(a, -self.action_bound, self.action_bound)


class Environment(Protocol):
    spec: EnvSpec

    def reset(self, seed: int) -> np.ndarray: ...

    def step(self, joint_action: np.ndarray) -> Tuple[np.ndarray, float, bool]: ...


class Controller(Protocol):
    """Anything that maps a global state to a joint action."""

    def reset(self, state: np.ndarray) -> None: ...

    def act(self, state: np.ndarray) -> np.ndarray: ...
