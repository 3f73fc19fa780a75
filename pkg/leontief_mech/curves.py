"""Threshold curves k -> value used for prices, zero curves and allocation thresholds."""

import csv
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

FloatArray = NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class ThresholdCurve:
    """A function of the ratio k, stored on an ascending k grid.

    Between grid points the curve is linearly interpolated; outside the grid it is
    held constant at the end values. Linear interpolation keeps both
    ratio-dependent price conditions (nondecreasing, and psi(k)/k nonincreasing)
    whenever they hold at the grid points.
    """

    k: FloatArray
    values: FloatArray
    name: str = "threshold"

    def __post_init__(self) -> None:
        k = np.asarray(self.k, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if k.ndim != 1 or k.shape != values.shape:
            msg = f"Curve grid and values must be 1-D with equal length, got {k.shape} and {values.shape}"
            raise ValueError(msg)
        if len(k) == 0:
            msg = "Curve must have at least one grid point"
            raise ValueError(msg)
        if np.any(np.diff(k) <= 0):
            msg = "Curve k grid must be strictly ascending"
            raise ValueError(msg)
        if not np.all(np.isfinite(values)):
            msg = "Curve values must be finite"
            raise ValueError(msg)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "values", values)

    def __call__(self, k: ArrayLike) -> FloatArray:
        return np.asarray(np.interp(np.asarray(k, dtype=float), self.k, self.values))

    def __len__(self) -> int:
        return len(self.k)

    @classmethod
    def from_function(cls, func: Callable[[FloatArray], ArrayLike], k: ArrayLike, name: str = "threshold") -> "ThresholdCurve":
        """Sample a vectorized function on the grid ``k``."""
        grid = np.asarray(k, dtype=float)
        return cls(grid, np.broadcast_to(np.asarray(func(grid), dtype=float), grid.shape).copy(), name)

    @classmethod
    def constant(cls, value: float, k: ArrayLike, name: str = "threshold") -> "ThresholdCurve":
        grid = np.asarray(k, dtype=float)
        return cls(grid, np.full_like(grid, float(value)), name)

    def is_constant(self, tol: float = 0.0) -> bool:
        return bool(np.ptp(self.values) <= tol)

    def to_rows(self) -> list[list[float]]:
        return [[float(k), float(v)] for k, v in zip(self.k, self.values, strict=True)]

    @classmethod
    def from_rows(cls, rows: list[list[float]], name: str = "threshold") -> "ThresholdCurve":
        if not rows:
            msg = "Curve table is empty"
            raise ValueError(msg)
        table = np.asarray(rows, dtype=float)
        if table.ndim != 2 or table.shape[1] != 2:
            msg = "Curve table rows must be [k, value] pairs"
            raise ValueError(msg)
        return cls(table[:, 0], table[:, 1], name)

    def to_csv(self, path: Path, value_column: str | None = None, fmt: Callable[[float], str] = repr) -> Path:
        """Write ``k,<value_column>`` rows (value column defaults to the curve name)."""
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["k", value_column or self.name])
            for k, value in zip(self.k, self.values, strict=True):
                writer.writerow([fmt(float(k)), fmt(float(value))])
        return path
