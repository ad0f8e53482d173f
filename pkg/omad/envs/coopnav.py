"""
Cooperative navigation in miniature: N double-integrator agents, N landmarks,
shared reward for covering landmarks and a penalty per colliding pair.

State layout: agent positions (N×2), agent velocities (N×2), landmark
positions (N×2), flattened in that order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import combinations
from typing import Optional, Tuple

import numpy as np

from omad.envs.base import EnvSpec


@dataclass
class EnvState:
    positions: np.ndarray
    velocities: np.ndarray
    landmarks: np.ndarray
    t: int = 0


class CoopNav:
    def __init__(
        self,
        n_agents: int = 2,
        episode_length: int = 25,
        collision_radius: float = 0.2,
        collision_penalty: float = 1.0,
        spawn_range: float = 1.0,
        **dynamics,
    ):
        self.spec = EnvSpec(
            name="coopnav",
            n_agents=n_agents,
            state_dim=6 * n_agents,
            action_dim=2,
            episode_length=episode_length,
            **dynamics,
        )
        self.collision_radius = collision_radius
        self.collision_penalty = collision_penalty
        self.spawn_range = spawn_range
        self.state: Optional[EnvState] = None

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        n, r = self.spec.n_agents, self.spawn_range
        self.state = EnvState(
            positions=rng.uniform(-r, r, (n, 2)),
            velocities=np.zeros((n, 2)),
            landmarks=rng.uniform(-r, r, (n, 2)),
        )
        return self.observe()

    def set_state(self, state: EnvState) -> np.ndarray:
        self.state = replace(
            state,
            positions=np.array(state.positions, dtype=np.float64),
            velocities=np.array(state.velocities, dtype=np.float64),
            landmarks=np.array(state.landmarks, dtype=np.float64),
        )
        return self.observe()

    def observe(self) -> np.ndarray:
        s = self.state
        return np.concatenate([s.positions.ravel(), s.velocities.ravel(), s.landmarks.ravel()])

    def decode(self, obs: np.ndarray) -> EnvState:
        n = self.spec.n_agents
        obs = np.asarray(obs, dtype=np.float64)
        return EnvState(
            positions=obs[: 2 * n].reshape(n, 2),
            velocities=obs[2 * n: 4 * n].reshape(n, 2),
            landmarks=obs[4 * n: 6 * n].reshape(n, 2),
        )

    def reward(self, positions: np.ndarray, landmarks: np.ndarray) -> float:
        dists = np.linalg.norm(positions[:, None, :] - landmarks[None, :, :], axis=-1)
        cover = dists.min(axis=0).sum()
        collisions = sum(
            1 for i, j in combinations(range(len(positions)), 2)
            if np.linalg.norm(positions[i] - positions[j]) < self.collision_radius
        )
        return float(-cover - self.collision_penalty * collisions)

    def step(self, joint_action: np.ndarray) -> Tuple[np.ndarray, float, bool]:
        spec, s = self.spec, self.state
        accel = spec.clip_action(joint_action).reshape(spec.n_agents, 2) / spec.mass
        s.velocities = spec.damping * s.velocities + accel * spec.dt
        s.positions = np.clip(s.positions + s.velocities * spec.dt, -spec.world_bound, spec.world_bound)
        s.t += 1
        return self.observe(), self.reward(s.positions, s.landmarks), s.t >= spec.episode_length
