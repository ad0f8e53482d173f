"""
Trainer hyperparameters.

Defaults are the published common hyperparameters; per-task learning rates and
value limits live in :data:`TASK_PRESETS`. Anything a run changes relative to
the published defaults is reported by :meth:`TrainerConfig.overrides` so the
harness can log it.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, List, Optional, Tuple

from omad.errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainerConfig:
    task: str = ""

    # data collection
    warmup_steps: int = 60000
    learning_starts: int = 5000
    buffer_size: int = 1000000
    batch_size: int = 256
    updates_per_episode: int = 1

    # soft Bellman backup
    gamma: float = 0.99
    terminal_bootstrap: bool = False
    v_max: float = 200.0
    n_atoms: int = 101
    xi: float = 0.005

    # policies
    policy_delay: int = 3
    rho: float = 0.0
    denoise_steps: int = 8
    eta: float = 1.0
    beta_min: float = 1e-3
    beta_max: float = 0.9999
    actor_hidden: Tuple[int, ...] = (256, 256)
    time_embedding_dim: int = 256
    actor_input_norm: bool = True

    # critic
    critic_hidden: Tuple[int, ...] = (2048, 2048)
    critic_input_norm: bool = True

    # temperature
    initial_alpha: float = 1.0
    target_entropy_scale: float = 4.0
    autotune_alpha: bool = True

    # optimisation
    learning_rate: float = 3.5e-5
    lr_actor: Optional[float] = None
    lr_critic: Optional[float] = None
    lr_alpha: Optional[float] = None
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    grad_clip_norm: float = 1.0
    bn_momentum: float = 0.99
    bn_warmup_steps: int = 100000

    @classmethod
    def published_defaults(cls) -> "TrainerConfig":
        return cls()

    @property
    def actor_lr(self) -> float:
        return self.learning_rate if self.lr_actor is None else self.lr_actor

    @property
    def critic_lr(self) -> float:
        return self.learning_rate if self.lr_critic is None else self.lr_critic

    @property
    def alpha_lr(self) -> float:
        return self.learning_rate if self.lr_alpha is None else self.lr_alpha

    def target_entropy(self, joint_action_dim: int) -> float:
        return self.target_entropy_scale * joint_action_dim

    def validate(self) -> "TrainerConfig":
        problems: List[str] = []

        def need(ok: bool, message: str) -> None:
            if not ok:
                problems.append(message)

        need(0.0 <= self.gamma < 1.0, f"gamma must lie in [0, 1), got {self.gamma}")
        need(0.0 <= self.rho <= 1.0, f"rho must lie in [0, 1], got {self.rho}")
        need(self.policy_delay >= 1, f"policy_delay must be >= 1, got {self.policy_delay}")
        need(self.batch_size >= 2, f"batch_size must be >= 2 (batch norm), got {self.batch_size}")
        need(self.buffer_size >= 1, f"buffer_size must be >= 1, got {self.buffer_size}")
        need(self.warmup_steps >= 0, f"warmup_steps must be >= 0, got {self.warmup_steps}")
        need(self.learning_starts >= 0, f"learning_starts must be >= 0, got {self.learning_starts}")
        need(self.updates_per_episode >= 1, f"updates_per_episode must be >= 1, got {self.updates_per_episode}")
        need(self.v_max > 0.0, f"v_max must be positive, got {self.v_max}")
        need(self.n_atoms >= 2, f"n_atoms must be >= 2, got {self.n_atoms}")
        need(self.initial_alpha > 0.0, f"initial_alpha must be positive, got {self.initial_alpha}")
        need(self.denoise_steps >= 1, f"denoise_steps must be >= 1, got {self.denoise_steps}")
        need(self.eta > 0.0, f"eta must be positive, got {self.eta}")
        need(0.0 < self.beta_min < self.beta_max, f"need 0 < beta_min < beta_max, got {self.beta_min}, {self.beta_max}")
        need(
            self.beta_max / self.denoise_steps < 1.0,
            f"beta_max / denoise_steps must stay below 1, got {self.beta_max / max(self.denoise_steps, 1)}",
        )
        need(self.time_embedding_dim >= 2 and self.time_embedding_dim % 2 == 0,
             f"time_embedding_dim must be even and >= 2, got {self.time_embedding_dim}")
        need(all(w >= 1 for w in self.actor_hidden), f"actor_hidden widths must be positive: {self.actor_hidden}")
        need(all(w >= 1 for w in self.critic_hidden), f"critic_hidden widths must be positive: {self.critic_hidden}")
        for name in ("learning_rate", "lr_actor", "lr_critic", "lr_alpha"):
            value = getattr(self, name)
            need(value is None or value > 0.0, f"{name} must be positive, got {value}")
        need(0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0,
             f"Adam betas must lie in [0, 1), got {self.adam_beta1}, {self.adam_beta2}")
        need(self.grad_clip_norm >= 0.0, f"grad_clip_norm must be >= 0, got {self.grad_clip_norm}")
        need(0.0 < self.bn_momentum < 1.0, f"bn_momentum must lie in (0, 1), got {self.bn_momentum}")
        need(self.bn_warmup_steps >= 0, f"bn_warmup_steps must be >= 0, got {self.bn_warmup_steps}")
        need(self.task == "" or self.task in TASK_PRESETS, f"unknown task preset {self.task!r}")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    def overrides(self) -> List[Tuple[str, Any, Any]]:
        """(field, published default, value) for every field this config changes."""
        base = self.published_defaults()
        return [
            (f.name, getattr(base, f.name), getattr(self, f.name))
            for f in fields(self)
            if getattr(base, f.name) != getattr(self, f.name)
        ]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


# Per-task learning rate and value limit of the published benchmarks, plus
# desk-scale settings for the built-in toy environments.
TASK_PRESETS: Dict[str, Dict[str, Any]] = {
    "coopnav_3": {"learning_rate": 3.5e-5, "v_max": 200.0},
    "coopnav_4": {"learning_rate": 2.5e-5, "v_max": 200.0},
    "deception_2": {"learning_rate": 5.0e-6, "v_max": 200.0},
    "ant_2x4": {"learning_rate": 7.0e-6, "v_max": 1200.0},
    "ant_2x4d": {"learning_rate": 2.0e-5, "v_max": 5000.0},
    "ant_4x2": {"learning_rate": 5.0e-6, "v_max": 3000.0},
    "halfcheetah_2x3": {"learning_rate": 1.0e-4, "v_max": 20000.0},
    "halfcheetah_6x1": {"learning_rate": 1.0e-3, "v_max": 3000.0},
    "walker2d_2x3": {"learning_rate": 5.0e-6, "v_max": 50000.0},
    "swimmer_2x1": {"learning_rate": 2.0e-5, "v_max": 400.0},
    "desk_coopnav": {
        "learning_rate": 3.0e-4,
        "v_max": 60.0,
        "gamma": 0.95,
        "warmup_steps": 2000,
        "learning_starts": 1000,
        "buffer_size": 100000,
        "bn_warmup_steps": 2000,
        "actor_hidden": (64, 64),
        "critic_hidden": (128, 128),
        "time_embedding_dim": 16,
        "target_entropy_scale": -1.0,
        "updates_per_episode": 8,
    },
    "desk_linespread": {
        "learning_rate": 3.0e-4,
        "v_max": 60.0,
        "gamma": 0.95,
        "warmup_steps": 1000,
        "learning_starts": 500,
        "buffer_size": 50000,
        "bn_warmup_steps": 1000,
        "actor_hidden": (64, 64),
        "critic_hidden": (128, 128),
        "time_embedding_dim": 16,
        "target_entropy_scale": -1.0,
        "updates_per_episode": 8,
    },
}


def apply_preset(config: TrainerConfig, task: str) -> TrainerConfig:
    if task not in TASK_PRESETS:
        raise ConfigError(f"unknown task preset {task!r}; choose from {sorted(TASK_PRESETS)}")
    return replace(config, task=task, **TASK_PRESETS[task])


def log_overrides(config: TrainerConfig) -> None:
    for name, default, value in config.overrides():
        logger.warning("trainer.%s = %s (published default %s)", name, value, default)
