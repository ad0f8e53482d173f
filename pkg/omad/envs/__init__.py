"""Built-in cooperative toy environments and their reference controllers."""

from typing import Any, Callable, Dict

from omad.envs.base import Controller, EnvSpec, Environment
from omad.envs.coopnav import CoopNav, EnvState
from omad.envs.coverage import CoverageGrid, coverage_fraction, coverage_update
from omad.envs.linespread import LineSpread
from omad.envs.oracle import OracleController, hold_return, oracle_return
from omad.errors import ConfigError

ENVIRONMENTS: Dict[str, Callable[..., Environment]] = {
    "coopnav": CoopNav,
    "linespread": LineSpread,
}


def make_env(name: str, **params: Any) -> Environment:
    try:
        factory = ENVIRONMENTS[name]
    except KeyError:
        raise ConfigError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {name}: {exc}") from exc


__all__ = [
    "Controller",
    "CoopNav",
    "CoverageGrid",
    "ENVIRONMENTS",
    "EnvSpec",
    "EnvState",
    "Environment",
    "LineSpread",
    "OracleController",
    "coverage_fraction",
    "coverage_update",
    "hold_return",
    "make_env",
    "oracle_return",
]
