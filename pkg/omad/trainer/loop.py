"""
The episode loop: collect with the target policies, then critic, gated
policy, temperature and target updates, in that order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from omad.critic import bellman_target, critic_forward_pair, critic_loss, project_to_support
from omad.diffusion import joint_elbo, sample_action
from omad.envs.base import Environment
from omad.errors import NonFiniteError, OmadError, TrainingAbort
from omad.ndiff.optim import Adam
from omad.ndiff.tensor import backward, no_grad
from omad.trainer.agents import AgentSet, TemperatureState, update_targets
from omad.trainer.buffer import Batch, ReplayBuffer, Transition
from omad.trainer.config import TrainerConfig
from omad.trainer.losses import sample_joint, synchronized_policy_loss, temperature_loss

logger = logging.getLogger(__name__)

CallLog = List[Tuple[int, str]]


def collect_episode(
    env: Environment,
    agents: AgentSet,
    rng: np.random.Generator,
    global_step: int,
    buffer: Optional[ReplayBuffer] = None,
    seed: Optional[int] = None,
) -> List[Transition]:
    """One episode; uniform actions while ``global_step`` is inside the warmup window."""
    spec = env.spec
    if seed is None:
        seed = int(rng.integers(0, 2 ** 31 - 1))
    state = env.reset(seed)
    transitions: List[Transition] = []
    done = False
    step = global_step
    while not done:
        if step < agents.config.warmup_steps:
            action = rng.uniform(-spec.action_bound, spec.action_bound, spec.joint_action_dim)
        else:
            with no_grad():
                action = np.concatenate([sample_action(state, target, rng).actions()[0] for target in agents.targets])
        next_state, reward, done = env.step(action)
        transition = Transition(
            s=state, a=spec.clip_action(action), r_team=reward, s_next=next_state,
            done=done, time_limit=done and len(transitions) + 1 >= spec.episode_length,
        )
        if buffer is not None:
            buffer.add(transition)
        transitions.append(transition)
        state = next_state
        step += 1
    return transitions


def update_critic(batch: Batch, agents: AgentSet, config: TrainerConfig, rng: np.random.Generator) -> float:
    """One Adam step on the critic toward the projected soft distributional target."""
    critic = agents.critic
    alpha = agents.temperature.alpha
    with no_grad():
        next_trajs = [sample_action(batch.next_states, target, rng) for target in agents.targets]
        next_actions = np.concatenate([traj.actions() for traj in next_trajs], axis=1)
        elbo_sum = joint_elbo(next_trajs, agents.targets).data
    critic.train()
    pred, next_probs = critic_forward_pair(critic, batch.states, batch.actions, batch.next_states, next_actions)
    shifted, probs = bellman_target(
        batch.rewards, batch.terminal_mask(config.terminal_bootstrap), next_probs.data,
        critic.support, config.gamma, alpha, elbo_sum,
    )
    target = project_to_support(shifted, probs, critic.support)
    loss = critic_loss(pred, target, config.xi)
    if not np.isfinite(loss.item()):
        raise NonFiniteError(
            "critic loss is not finite",
            {
                "reward_range": [float(batch.rewards.min()), float(batch.rewards.max())],
                "elbo_range": [float(np.min(elbo_sum)), float(np.max(elbo_sum))],
                "alpha": alpha,
                "indices": batch.indices[:8].tolist(),
            },
        )
    agents.critic_optim.zero_grad()
    backward(loss)
    agents.critic_optim.step()
    return loss.item()


def update_policies(
    batch: Batch, agents: AgentSet, config: TrainerConfig, rng: np.random.Generator,
) -> Tuple[float, np.ndarray]:
    """One synchronized Adam step over every agent's policy. Returns the loss and the detached joint ELBO."""
    for policy in agents.policies:
        policy.train()
    agents.critic.eval()
    try:
        loss, diagnostics = synchronized_policy_loss(
            batch.states, agents.policies, agents.critic.q_values, agents.temperature.alpha, rng,
        )
        agents.actor_optim.zero_grad()
        backward(loss)
        # the critic is only read here
        agents.critic.zero_grad()
        agents.actor_optim.step()
        for policy in agents.policies:
            policy.commit_statistics()
    finally:
        agents.critic.train()
    return loss.item(), diagnostics["joint_elbo"]


def sample_joint_elbo(states: np.ndarray, agents: AgentSet, rng: np.random.Generator) -> np.ndarray:
    """Detached joint ELBO of the online policies at ``states``."""
    snapshot = agents.snapshot()
    with no_grad():
        trajectories, _ = sample_joint(states, snapshot, rng)
        return joint_elbo(trajectories, snapshot).data


def update_temperature(elbo_values: np.ndarray, temperature: TemperatureState, optimizer: Adam) -> float:
    loss = temperature_loss(temperature, float(np.mean(elbo_values)))
    optimizer.zero_grad()
    backward(loss)
    optimizer.step()
    return loss.item()


@dataclass
class EpisodeReport:
    episode: int
    env_steps: int
    episode_return: float
    learning: bool
    alpha: float
    critic_loss: Optional[float] = None
    policy_loss: Optional[float] = None
    joint_elbo_mean: Optional[float] = None
    states: np.ndarray = field(default=None, repr=False)


@dataclass
class TrainingResult:
    agents: AgentSet
    buffer: ReplayBuffer
    episodes: int = 0
    env_steps: int = 0
    counts: Dict[str, int] = field(default_factory=lambda: {"critic": 0, "policy": 0, "temperature": 0, "targets": 0})


def _learn(
    m: int,
    agents: AgentSet,
    buffer: ReplayBuffer,
    config: TrainerConfig,
    sample_rng: np.random.Generator,
    update_rng: np.random.Generator,
    report: EpisodeReport,
    counts: Dict[str, int],
    call_log: Optional[CallLog],
) -> None:
    def mark(op: str) -> None:
        counts[op] += 1
        if call_log is not None:
            call_log.append((m, op))

    for _ in range(config.updates_per_episode):
        batch = buffer.sample(config.batch_size, sample_rng)
        report.critic_loss = update_critic(batch, agents, config, update_rng)
        mark("critic")
        elbo = None
        if m % config.policy_delay == 0:
            report.policy_loss, elbo = update_policies(batch, agents, config, update_rng)
            mark("policy")
        if config.autotune_alpha:
            if elbo is None:
                elbo = sample_joint_elbo(batch.states, agents, update_rng)
            update_temperature(elbo, agents.temperature, agents.alpha_optim)
            mark("temperature")
        if elbo is not None:
            report.joint_elbo_mean = float(np.mean(elbo))
        update_targets(agents, config.rho)
        mark("targets")


def train(
    config: TrainerConfig,
    env: Environment,
    seed: int,
    total_episodes: int,
    call_log: Optional[CallLog] = None,
    on_episode: Optional[Callable[[EpisodeReport, AgentSet], None]] = None,
    agents: Optional[AgentSet] = None,
) -> TrainingResult:
    """
    Run ``total_episodes`` episodes. ``on_episode`` sees every episode report
    (the harness evaluates and writes metrics from it); ``call_log`` receives
    ``(episode, op)`` for each update in execution order.

    Any failure after setup is re-raised as :class:`TrainingAbort` carrying a
    diagnostic record.
    """
    config.validate()
    spec = env.spec
    init_rng, rollout_rng, env_rng, sample_rng, update_rng = (
        np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(5)
    )
    if agents is None:
        agents = AgentSet.build(spec, config, init_rng)
    buffer = ReplayBuffer(config.buffer_size, spec.state_dim, spec.joint_action_dim)
    result = TrainingResult(agents, buffer)
    logger.info(
        "training %s: %d agents, state %d, action %d per agent, %d episodes, seed %d",
        spec.name, spec.n_agents, spec.state_dim, spec.action_dim, total_episodes, seed,
    )
    learning = False
    op = "setup"
    for m in range(1, total_episodes + 1):
        try:
            op = "collect"
            transitions = collect_episode(
                env, agents, rollout_rng, result.env_steps, buffer, seed=int(env_rng.integers(0, 2 ** 31 - 1)),
            )
            result.env_steps += len(transitions)
            result.episodes = m
            report = EpisodeReport(
                episode=m,
                env_steps=result.env_steps,
                episode_return=float(sum(t.r_team for t in transitions)),
                learning=len(buffer) > config.learning_starts,
                alpha=agents.temperature.alpha,
                states=np.stack([t.s for t in transitions] + [transitions[-1].s_next]),
            )
            if report.learning:
                if not learning:
                    logger.info("learning starts at episode %d (%d transitions stored)", m, len(buffer))
                    learning = True
                op = "update"
                _learn(m, agents, buffer, config, sample_rng, update_rng, report, result.counts, call_log)
                report.alpha = agents.temperature.alpha
            logger.debug(
                "episode %d: return %.3f, critic %s, policy %s, alpha %.4g",
                m, report.episode_return, report.critic_loss, report.policy_loss, report.alpha,
            )
            if on_episode is not None:
                op = "report"
                on_episode(report, agents)
        except Exception as exc:
            record = {
                "episode": m,
                "env_steps": result.env_steps,
                "stage": op,
                "error": type(exc).__name__,
                "message": str(exc),
                "diagnostics": getattr(exc, "diagnostics", {}),
                "counts": dict(result.counts),
            }
            if isinstance(exc, OmadError):
                logger.error("training aborted at episode %d during %s: %s", m, op, exc)
            else:
                logger.exception(
                    "training aborted at episode %d during %s by an unexpected %s", m, op, type(exc).__name__,
                )
            raise TrainingAbort(f"episode {m} ({op}): {exc}", record) from exc
    return result
