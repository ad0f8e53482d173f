"""
Run orchestration: train, evaluate on an interval, write artifacts.

Output directory layout::

    config.echo        effective configuration (reloadable)
    metrics.csv        one MetricsRow per evaluation
    coverage.csv       visited coverage cells
    final.ckpt         agent parameters (+ final.ckpt.manifest)
    run_summary.json   seed, final evaluation, oracle reference, counts, status
    abort.json         diagnostic record, only when training aborted
"""

from __future__ import annotations

import copy
import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from omad.diffusion import ScorePolicy, sample_action
from omad.envs.base import Controller, Environment
from omad.envs.coverage import CoverageGrid, coverage_fraction, coverage_update
from omad.envs.linespread import LineSpread
from omad.envs.oracle import hold_return, oracle_return
from omad.errors import CheckpointError, ConfigError, TrainingAbort
from omad.harness.config import RunConfig, write_echo
from omad.harness.metrics import MetricsRow, MetricsWriter
from omad.ndiff.checkpoint import load_checkpoint, save_checkpoint
from omad.ndiff.tensor import no_grad
from omad.trainer.agents import AgentSet
from omad.trainer.loop import EpisodeReport, train

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ABORT = 2


class PolicyController:
    """Decentralized execution: each agent samples its own action from the global state."""

    def __init__(self, policies: Sequence[ScorePolicy], rng: np.random.Generator):
        self.policies = [copy.deepcopy(p).eval() for p in policies]
        self.rng = rng

    def reset(self, state: np.ndarray) -> None:
        pass

    def act(self, state: np.ndarray) -> np.ndarray:
        with no_grad():
            return np.concatenate([sample_action(state, p, self.rng).actions()[0] for p in self.policies])


def evaluate_controller(env: Environment, controller: Controller, n_episodes: int, seed: int) -> Tuple[float, float]:
    """Mean and (population) std of returns over episodes seeded ``seed``, ``seed + 1``, ..."""
    if n_episodes < 1:
        raise ConfigError(f"need at least one evaluation episode, got {n_episodes}")
    returns = []
    for k in range(n_episodes):
        state = env.reset(seed + k)
        controller.reset(state)
        total, done = 0.0, False
        while not done:
            state, reward, done = env.step(controller.act(state))
            total += reward
        returns.append(total)
    return float(np.mean(returns)), float(np.std(returns))


def reference_returns(env: Environment, n_episodes: int, seed: int) -> Tuple[float, float]:
    """Mean oracle and hold returns over the evaluation seeds."""
    oracle = float(np.mean([oracle_return(env, seed + k) for k in range(n_episodes)]))
    hold = float(np.mean([hold_return(env, seed + k) for k in range(n_episodes)]))
    return oracle, hold


def normalized_score(value: float, oracle: float, hold: float) -> Optional[float]:
    """0 at the hold return, 1 at the oracle return."""
    gap = oracle - hold
    if abs(gap) < 1e-12:
        return None
    return (value - hold) / gap


def mode_histogram(
    policies: Sequence[ScorePolicy], env: LineSpread, n_samples: int, rng: np.random.Generator,
) -> Dict[int, int]:
    """Count which target assignment each sampled joint action at the symmetric state heads for."""
    states = np.tile(env.symmetric_state(), (n_samples, 1))
    snapshot = [copy.deepcopy(p).eval() for p in policies]
    with no_grad():
        actions = np.concatenate([sample_action(states, p, rng).actions() for p in snapshot], axis=1)
    counts = {0: 0, 1: 0}
    for joint in actions:
        counts[LineSpread.mode(joint)] += 1
    return counts


def evaluate(
    checkpoint: Union[str, Path], config: RunConfig, n_episodes: int = 10, seed: Optional[int] = None,
) -> Tuple[float, float]:
    """Evaluate the online policies stored in ``checkpoint`` on the configured environment."""
    env = config.env.build()
    agents = load_agents(checkpoint, config)
    seed = config.seed if seed is None else seed
    controller = PolicyController(agents.policies, np.random.default_rng([seed, 1]))
    return evaluate_controller(env, controller, n_episodes, seed)


@dataclass
class RunResult:
    status: int
    output_dir: Path
    summary: Dict[str, Any] = field(default_factory=dict)


def _write_coverage(grid: CoverageGrid, path: Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("row", "col"))
        writer.writerows(grid.cells())


def run(config: RunConfig, output_dir: Optional[Union[str, Path]] = None) -> RunResult:
    config.validate()
    out = Path(output_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_echo(config, out / "config.echo")
    env = config.env.build()
    eval_env = config.env.build()
    ec = config.env
    grid = CoverageGrid(tuple(ec.coverage_dims), tuple(ec.coverage_low), tuple(ec.coverage_high), ec.coverage_cell)
    metrics = MetricsWriter(out / "metrics.csv")
    eval_seed = config.seed + config.eval.seed_offset
    started = time.perf_counter()
    last: Dict[str, Optional[float]] = {"critic_loss": None, "policy_loss": None, "joint_elbo_mean": None}
    final_eval: Dict[str, float] = {}

    def on_episode(report: EpisodeReport, agents: AgentSet) -> None:
        for state in report.states:
            coverage_update(grid, state)
        for key in last:
            if getattr(report, key) is not None:
                last[key] = getattr(report, key)
        if report.episode % config.eval.interval:
            return
        controller = PolicyController(agents.policies, np.random.default_rng([eval_seed, report.episode]))
        mean, std = evaluate_controller(eval_env, controller, config.eval.episodes, eval_seed)
        final_eval.update(mean=mean, std=std, episode=report.episode)
        row = MetricsRow(
            episode=report.episode,
            env_steps=report.env_steps,
            eval_return_mean=mean,
            eval_return_std=std,
            joint_elbo_mean=last["joint_elbo_mean"],
            alpha=report.alpha,
            critic_loss=last["critic_loss"],
            policy_loss=last["policy_loss"],
            coverage_fraction=coverage_fraction(grid),
            wall_clock_seconds=time.perf_counter() - started if config.eval.record_wall_clock else None,
        )
        metrics.write(row)
        logger.info(
            "episode %d | steps %d | return %.3f ± %.3f | alpha %.4g | coverage %.3f",
            row.episode, row.env_steps, mean, std, row.alpha, row.coverage_fraction,
        )

    summary: Dict[str, Any] = {
        "seed": config.seed,
        "env": config.env.name,
        "n_agents": env.spec.n_agents,
        "total_episodes": config.total_episodes,
    }
    status = EXIT_OK
    try:
        result = train(
            config.trainer, env, config.seed, config.total_episodes, on_episode=on_episode,
        )
    except TrainingAbort as exc:
        status = EXIT_ABORT
        (out / "abort.json").write_text(json.dumps(exc.record, indent=2, default=str) + "\n")
        summary.update(status="aborted", abort=exc.record)
        logger.error("run aborted; diagnostics in %s", out / "abort.json")
    else:
        ckpt = save_checkpoint(out / "final.ckpt", result.agents.state_dict())
        logger.info("checkpoint written to %s", ckpt)
        summary.update(status="ok", env_steps=result.env_steps, updates=dict(result.counts))
    _write_coverage(grid, out / "coverage.csv")

    summary.update(
        coverage_cells=len(grid.visited),
        coverage_total=grid.total_cells,
        coverage_fraction=coverage_fraction(grid),
        metric_rows=metrics.rows,
    )
    if final_eval:
        oracle, hold = reference_returns(eval_env, config.eval.episodes, eval_seed)
        summary.update(
            final_eval=final_eval,
            oracle_return=oracle,
            hold_return=hold,
            normalized_score=normalized_score(final_eval["mean"], oracle, hold),
        )
    (out / "run_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=str) + "\n")
    return RunResult(status, out, summary)


def load_agents(checkpoint: Union[str, Path], config: RunConfig) -> AgentSet:
    env = config.env.build()
    agents = AgentSet.build(env.spec, config.trainer, np.random.default_rng(0))
    try:
        agents.load_state_dict(load_checkpoint(checkpoint))
    except CheckpointError:
        logger.error("checkpoint %s does not match env %s", checkpoint, config.env.name)
        raise
    return agents
