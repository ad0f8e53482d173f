"""metrics.csv: one row per evaluation, fixed column order."""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import List, Optional, Union


@dataclass(frozen=True)
class MetricsRow:
    episode: int
    env_steps: int
    eval_return_mean: float
    eval_return_std: float
    joint_elbo_mean: Optional[float]
    alpha: float
    critic_loss: Optional[float]
    policy_loss: Optional[float]
    coverage_fraction: float
    wall_clock_seconds: Optional[float] = None

    def cells(self) -> List[str]:
        return [format_cell(v) for v in astuple(self)]


COLUMNS = tuple(f.name for f in fields(MetricsRow))


def format_cell(value) -> str:
    """Empty for absent or non-finite values, repr otherwise."""
    if value is None:
        return ""
    if isinstance(value, float):
        value = float(value)  # numpy scalars repr with their type name
        return repr(value) if math.isfinite(value) else ""
    return str(int(value)) if isinstance(value, int) else str(value)


class MetricsWriter:
    """Appends rows and flushes each one, so an aborted run keeps what it logged."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", newline="") as f:
            csv.writer(f, lineterminator="\n").writerow(COLUMNS)
        self.rows = 0

    def write(self, row: MetricsRow) -> None:
        with open(self.path, "a", newline="") as f:
            csv.writer(f, lineterminator="\n").writerow(row.cells())
        self.rows += 1


def read_metrics(path: Union[str, Path]) -> List[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))
