"""Off-policy training of per-agent diffusion policies against a shared distributional critic."""

from omad.trainer.agents import AgentSet, TemperatureState, update_targets
from omad.trainer.buffer import Batch, ReplayBuffer, Transition
from omad.trainer.config import TASK_PRESETS, TrainerConfig, apply_preset
from omad.trainer.losses import synchronized_policy_loss, temperature_loss
from omad.trainer.loop import (
    EpisodeReport,
    TrainingResult,
    collect_episode,
    train,
    update_critic,
    update_policies,
    update_temperature,
)

__all__ = [
    "AgentSet",
    "Batch",
    "EpisodeReport",
    "ReplayBuffer",
    "TASK_PRESETS",
    "TemperatureState",
    "TrainerConfig",
    "TrainingResult",
    "Transition",
    "apply_preset",
    "collect_episode",
    "synchronized_policy_loss",
    "temperature_loss",
    "train",
    "update_critic",
    "update_policies",
    "update_targets",
    "update_temperature",
]
