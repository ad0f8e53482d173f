"""
Command-line entry point::

    python -m omad --config configs/coopnav_2.cfg [--seed N] [--out DIR]
    python -m omad --config configs/coopnav_2.cfg --eval-only runs/coopnav/final.ckpt

Exit status: 0 success, 1 configuration error, 2 training abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Dict, List, Optional

from dotenv import load_dotenv

from omad.errors import CheckpointError, ConfigError, OmadError
from omad.harness.config import load_config
from omad.harness.run import EXIT_ABORT, EXIT_CONFIG, EXIT_OK, evaluate, run
from omad.log import configure_logging

logger = logging.getLogger("omad.cli")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="omad", description="Train or evaluate diffusion-policy agents.")
    parser.add_argument("--config", required=True, help="run configuration file (key = value lines)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--eval-only", metavar="CKPT", help="evaluate a checkpoint instead of training")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR (default: $OMAD_LOG_LEVEL or INFO)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    load_dotenv()
    configure_logging(args.log_level or os.getenv("OMAD_LOG_LEVEL", "INFO"))

    overrides: Dict[str, str] = {}
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.out:
        overrides["output_dir"] = args.out
    try:
        config = load_config(args.config, overrides)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG

    if args.eval_only:
        try:
            mean, std = evaluate(args.eval_only, config, n_episodes=config.eval.episodes, seed=config.seed)
        except (CheckpointError, ConfigError) as exc:
            logger.error("cannot evaluate %s: %s", args.eval_only, exc)
            return EXIT_CONFIG
        logger.info("✅ %d episodes: return %.3f ± %.3f", config.eval.episodes, mean, std)
        print(json.dumps({"checkpoint": args.eval_only, "episodes": config.eval.episodes, "mean": mean, "std": std}))
        return EXIT_OK

    logger.info("🚀 %s run, seed %d -> %s", config.env.name, config.seed, config.output_dir)
    try:
        result = run(config)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG
    except OmadError as exc:
        logger.error("run failed: %s", exc)
        return EXIT_ABORT
    if result.status == EXIT_OK:
        logger.info("✅ run complete: %s", result.output_dir)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
