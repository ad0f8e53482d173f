"""Configuration files, run orchestration, metrics and the command line."""

from omad.harness.config import EnvConfig, EvalConfig, RunConfig, load_config, parse_config, write_echo
from omad.harness.metrics import COLUMNS, MetricsRow, MetricsWriter, read_metrics
from omad.harness.run import (
    PolicyController,
    RunResult,
    evaluate,
    evaluate_controller,
    mode_histogram,
    normalized_score,
    run,
)

__all__ = [
    "COLUMNS",
    "EnvConfig",
    "EvalConfig",
    "MetricsRow",
    "MetricsWriter",
    "PolicyController",
    "RunConfig",
    "RunResult",
    "evaluate",
    "evaluate_controller",
    "load_config",
    "mode_histogram",
    "normalized_score",
    "parse_config",
    "read_metrics",
    "run",
    "write_echo",
]
