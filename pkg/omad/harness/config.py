"""
Run configuration files.

One ``key = value`` per line, ``#`` starts a comment. Top-level keys are
``seed``, ``total_episodes`` and ``output_dir``; everything else is
``env.<field>``, ``trainer.<field>`` or ``eval.<field>``. ``trainer.task``
applies a preset before the other trainer keys, whatever the line order.
"""

from __future__ import annotations

import logging
import re
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from omad.envs import make_env
from omad.envs.base import Environment
from omad.errors import ConfigError
from omad.trainer.config import TrainerConfig, apply_preset, log_overrides

logger = logging.getLogger(__name__)

TRUE_WORDS = {"true", "yes", "on", "1"}
FALSE_WORDS = {"false", "no", "off", "0"}


@dataclass(frozen=True)
class EnvConfig:
    name: str = "coopnav"
    n_agents: int = 2
    episode_length: int = 25
    spawn_range: Optional[float] = None
    collision_radius: float = 0.2
    collision_penalty: float = 1.0
    speed: float = 1.0
    mass: float = 1.0
    damping: float = 0.9
    dt: float = 0.1
    world_bound: float = 2.0
    coverage_dims: Tuple[int, ...] = (0, 1)
    coverage_low: Tuple[float, ...] = (-2.0, -2.0)
    coverage_high: Tuple[float, ...] = (2.0, 2.0)
    coverage_cell: float = 0.5

    def env_kwargs(self) -> Dict[str, Any]:
        kwargs: Dict[str, Any] = {
            "episode_length": self.episode_length,
            "mass": self.mass,
            "damping": self.damping,
            "dt": self.dt,
            "world_bound": self.world_bound,
        }
        if self.spawn_range is not None:
            kwargs["spawn_range"] = self.spawn_range
        if self.name == "coopnav":
            kwargs.update(
                n_agents=self.n_agents,
                collision_radius=self.collision_radius,
                collision_penalty=self.collision_penalty,
            )
        elif self.name == "linespread":
            kwargs["speed"] = self.speed
        return kwargs

    def build(self) -> Environment:
        return make_env(self.name, **self.env_kwargs())

    def validate(self) -> "EnvConfig":
        if self.name == "linespread" and self.n_agents != 2:
            raise ConfigError(f"linespread has exactly 2 agents, got env.n_agents = {self.n_agents}")
        if len(self.coverage_dims) != 2 or len(self.coverage_low) != 2 or len(self.coverage_high) != 2:
            raise ConfigError("coverage needs exactly two dims, lows and highs")
        if self.coverage_cell <= 0.0:
            raise ConfigError(f"env.coverage_cell must be positive, got {self.coverage_cell}")
        return self


@dataclass(frozen=True)
class EvalConfig:
    interval: int = 10
    episodes: int = 10
    seed_offset: int = 1000003
    record_wall_clock: bool = False

    def validate(self) -> "EvalConfig":
        if self.interval < 1:
            raise ConfigError(f"eval.interval must be >= 1, got {self.interval}")
        if self.episodes < 1:
            raise ConfigError(f"eval.episodes must be >= 1, got {self.episodes}")
        return self


@dataclass(frozen=True)
class RunConfig:
    seed: Optional[int] = None
    total_episodes: int = 100
    output_dir: str = "runs/omad"
    env: EnvConfig = field(default_factory=EnvConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def validate(self) -> "RunConfig":
        if self.seed is None:
            raise ConfigError("seed is required (set `seed = N` or pass --seed)")
        if self.total_episodes < 0:
            raise ConfigError(f"total_episodes must be >= 0, got {self.total_episodes}")
        self.env.validate()
        self.trainer.validate()
        self.eval.validate()
        return self


SECTIONS = {"env": EnvConfig, "trainer": TrainerConfig, "eval": EvalConfig}
TOP_LEVEL = ("seed", "total_episodes", "output_dir")


def _parse_scalar(raw: str, kind: type) -> Any:
    if kind is bool:
        word = raw.lower()
        if word in TRUE_WORDS:
            return True
        if word in FALSE_WORDS:
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if kind is int:
        try:
            return int(raw)
        except ValueError:
            value = float(raw)
            if not value.is_integer():
                raise
            return int(value)
    if kind is float:
        return float(raw)
    if kind is str:
        return raw
    raise ValueError(f"unsupported field type {kind!r}")


def parse_value(raw: str, hint: Any) -> Any:
    """Convert ``raw`` according to a dataclass field annotation."""
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is Union:
        inner = [a for a in args if a is not type(None)]
        if raw.lower() in ("none", ""):
            return None
        return parse_value(raw, inner[0])
    if origin is tuple:
        item = args[0]
        parts = [p.strip() for p in raw.strip("()[] ").split(",") if p.strip()]
        return tuple(_parse_scalar(p, item) for p in parts)
    return _parse_scalar(raw, hint)


def format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _hints(cls: type) -> Dict[str, Any]:
    return typing.get_type_hints(cls)


def _split_lines(text: str, source: str) -> List[Tuple[int, str, str]]:
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"{source}:{lineno}: expected `key = value`, got {line.strip()!r}")
        key, raw = (part.strip() for part in content.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: missing key")
        entries.append((lineno, key, raw))
    return entries


def parse_config(text: str, source: str = "<config>", overrides: Optional[Dict[str, str]] = None) -> RunConfig:
    entries = _split_lines(text, source)
    for key, raw in (overrides or {}).items():
        entries.append((0, key, raw))

    top: Dict[str, Any] = {}
    values: Dict[str, Dict[str, Any]] = {name: {} for name in SECTIONS}
    seen: Dict[str, int] = {}
    for lineno, key, raw in entries:
        where = f"{source}:{lineno}" if lineno else "command line"
        if key in seen and lineno:
            raise ConfigError(f"{where}: duplicate key {key!r} (first set on line {seen[key]})")
        seen[key] = lineno
        if key in TOP_LEVEL:
            hint = _hints(RunConfig)[key]
            target = top
            name = key
        else:
            section, _, name = key.partition(".")
            if section not in SECTIONS or not name:
                raise ConfigError(f"{where}: unknown key {key!r}")
            hints = _hints(SECTIONS[section])
            if name not in hints:
                raise ConfigError(f"{where}: unknown key {key!r}")
            hint = hints[name]
            target = values[section]
        try:
            target[name] = parse_value(raw, hint)
        except ValueError as exc:
            raise ConfigError(f"{where}: cannot parse {key} = {raw!r}: {exc}") from exc

    trainer = TrainerConfig()
    task = values["trainer"].pop("task", "")
    if task:
        trainer = apply_preset(trainer, task)
    try:
        trainer = replace(trainer, **values["trainer"])
        config = RunConfig(
            env=EnvConfig(**values["env"]),
            trainer=trainer,
            eval=EvalConfig(**values["eval"]),
            **top,
        )
    except TypeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    try:
        config.validate()
    except ConfigError as exc:
        message = str(exc)
        lines = [f"{source}:{lineno} ({key})" for key, lineno in seen.items()
                 if lineno and re.search(rf"\b{re.escape(key.rpartition('.')[2])}\b", message)]
        raise ConfigError(f"{', '.join(lines) or source}: {message}") from exc
    return config


def load_config(path: Union[str, Path], overrides: Optional[Dict[str, str]] = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    config = parse_config(path.read_text(encoding="utf-8"), str(path), overrides)
    logger.debug("loaded %s (%s, seed %d)", path, config.env.name, config.seed)
    log_overrides(config.trainer)
    return config


def echo_lines(config: RunConfig) -> List[str]:
    lines = [f"{key} = {format_value(getattr(config, key))}" for key in TOP_LEVEL]
    for section in SECTIONS:
        sub = getattr(config, section)
        lines.extend(f"{section}.{f.name} = {format_value(getattr(sub, f.name))}" for f in fields(sub))
    return lines


def write_echo(config: RunConfig, path: Union[str, Path]) -> Path:
    """Write the effective configuration in the same format, reloadable with :func:`load_config`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(echo_lines(config)) + "\n", encoding="utf-8")
    return path
