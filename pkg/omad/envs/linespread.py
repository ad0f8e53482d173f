"""
Two agents on a line, targets at -1 and +1. The reward only asks that the
targets be covered, not by whom, so two joint strategies are optimal.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from omad.envs.base import EnvSpec

TARGETS = np.array([-1.0, 1.0])


class LineSpread:
    def __init__(self, episode_length: int = 25, spawn_range: float = 0.1, speed: float = 1.0, **dynamics):
        self.spec = EnvSpec(
            name="linespread", n_agents=2, state_dim=2, action_dim=1,
            episode_length=episode_length, **dynamics,
        )
        self.spawn_range = spawn_range
        self.speed = speed
        self.positions: Optional[np.ndarray] = None
        self.t = 0

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        self.positions = rng.uniform(-self.spawn_range, self.spawn_range, 2)
        self.t = 0
        return self.positions.copy()

    def set_positions(self, positions) -> np.ndarray:
        self.positions = np.array(positions, dtype=np.float64).reshape(2)
        self.t = 0
        return self.positions.copy()

    def symmetric_state(self) -> np.ndarray:
        return np.zeros(2)

    @staticmethod
    def reward(positions: np.ndarray) -> float:
        x = np.asarray(positions, dtype=np.float64)
        straight = abs(x[0] - TARGETS[0]) + abs(x[1] - TARGETS[1])
        crossed = abs(x[0] - TARGETS[1]) + abs(x[1] - TARGETS[0])
        return float(-min(straight, crossed))

    @staticmethod
    def mode(positions: np.ndarray) -> int:
        """0 if agent 0 heads for -1, 1 if it heads for +1."""
        return int(np.asarray(positions).reshape(-1)[0] > np.asarray(positions).reshape(-1)[1])

    def step(self, joint_action: np.ndarray) -> Tuple[np.ndarray, float, bool]:
        spec = self.spec
        a = spec.clip_action(joint_action)
        self.positions = np.clip(self.positions + self.speed * a * spec.dt, -spec.world_bound, spec.world_bound)
        self.t += 1
        return self.positions.copy(), self.reward(self.positions), self.t >= spec.episode_length
