"""Fixed-capacity replay ring with uniform sampling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from omad.errors import ConfigError, NonFiniteError, ShapeError


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: np.ndarray
    r_team: float
    s_next: np.ndarray
    done: bool
    time_limit: bool = False


@dataclass(frozen=True)
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    time_limits: np.ndarray
    indices: np.ndarray

    def __len__(self) -> int:
        return self.states.shape[0]

    def terminal_mask(self, terminal_bootstrap: bool) -> np.ndarray:
        """1 where the bootstrap is cut. Time-limit ends keep it unless ``terminal_bootstrap``."""
        if terminal_bootstrap:
            return self.dones.astype(np.float64)
        return (self.dones & ~self.time_limits).astype(np.float64)


class ReplayBuffer:
    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ConfigError(f"replay capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity, dtype=bool)
        self.time_limits = np.zeros(capacity, dtype=bool)
        self.cursor = 0
        self.size = 0
        self.inserted = 0

    def __len__(self) -> int:
        return self.size

    def add(self, t: Transition) -> None:
        s = np.asarray(t.s, dtype=np.float64).reshape(-1)
        a = np.asarray(t.a, dtype=np.float64).reshape(-1)
        s_next = np.asarray(t.s_next, dtype=np.float64).reshape(-1)
        if s.shape[0] != self.state_dim or s_next.shape[0] != self.state_dim or a.shape[0] != self.action_dim:
            raise ShapeError(
                f"transition shapes s={s.shape} a={a.shape} s'={s_next.shape} do not fit "
                f"state_dim={self.state_dim}, action_dim={self.action_dim}"
            )
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(a)) and np.all(np.isfinite(s_next))
                and np.isfinite(t.r_team)):
            raise NonFiniteError("refusing to store a non-finite transition", {"slot": self.cursor})
        i = self.cursor
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = float(t.r_team)
        self.next_states[i] = s_next
        self.dones[i] = bool(t.done)
        self.time_limits[i] = bool(t.time_limit)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.inserted += 1

    def extend(self, transitions: Iterable[Transition]) -> None:
        for t in transitions:
            self.add(t)

    def _gather(self, idx: np.ndarray) -> Batch:
        return Batch(
            states=self.states[idx].copy(),
            actions=self.actions[idx].copy(),
            rewards=self.rewards[idx].copy(),
            next_states=self.next_states[idx].copy(),
            dones=self.dones[idx].copy(),
            time_limits=self.time_limits[idx].copy(),
            indices=np.asarray(idx),
        )

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform over stored slots, with replacement."""
        if self.size == 0:
            raise ConfigError("cannot sample from an empty replay buffer")
        return self._gather(rng.integers(0, self.size, size=batch_size))

    def contents(self) -> Batch:
        """Everything stored, oldest first."""
        if self.size < self.capacity:
            order = np.arange(self.size)
        else:
            order = (self.cursor + np.arange(self.capacity)) % self.capacity
        return self._gather(order)
