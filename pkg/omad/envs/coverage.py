"""
State-coverage metric: the fraction of cells of a 2-D state slice that a run
has visited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Set, Tuple

import numpy as np

from omad.errors import ConfigError, ShapeError

Cell = Tuple[int, int]


@dataclass
class CoverageGrid:
    dims: Tuple[int, int]
    low: Tuple[float, float]
    high: Tuple[float, float]
    cell: float = 0.5
    visited: Set[Cell] = field(default_factory=set)

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.low = tuple(float(v) for v in self.low)
        self.high = tuple(float(v) for v in self.high)
        if len(self.dims) != 2 or len(self.low) != 2 or len(self.high) != 2:
            raise ConfigError("coverage grid covers exactly two state dimensions")
        if self.cell <= 0.0:
            raise ConfigError(f"cell size must be positive, got {self.cell}")
        if any(hi <= lo for lo, hi in zip(self.low, self.high)):
            raise ConfigError(f"empty coverage range {self.low} .. {self.high}")

    @property
    def shape(self) -> Tuple[int, int]:
        # tolerance keeps exact multiples of the cell size from gaining a cell
        return tuple(
            max(1, math.ceil((hi - lo) / self.cell - 1e-9)) for lo, hi in zip(self.low, self.high)
        )

    @property
    def total_cells(self) -> int:
        rows, cols = self.shape
        return rows * cols

    def cell_of(self, s: np.ndarray) -> Cell:
        s = np.asarray(s, dtype=np.float64).reshape(-1)
        if max(self.dims) >= s.shape[0]:
            raise ShapeError(f"state has {s.shape[0]} entries, coverage reads dims {self.dims}")
        index = []
        for axis, dim in enumerate(self.dims):
            k = int(math.floor((s[dim] - self.low[axis]) / self.cell))
            index.append(min(max(k, 0), self.shape[axis] - 1))
        return index[0], index[1]

    def cells(self) -> List[Cell]:
        return sorted(self.visited)


def coverage_update(grid: CoverageGrid, s: np.ndarray) -> Cell:
    """Mark the cell containing ``s``; out-of-range states land on boundary cells."""
    cell = grid.cell_of(s)
    grid.visited.add(cell)
    return cell


def coverage_fraction(grid: CoverageGrid) -> float:
    return len(grid.visited) / grid.total_cells
