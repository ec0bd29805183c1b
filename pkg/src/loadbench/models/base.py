from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..quantiles import QuantileGrid


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class QuantileForecast:
    timestamps: np.ndarray
    values: np.ndarray  # (rows, len(grid)); not necessarily monotone
    grid: QuantileGrid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != len(self.grid) or len(v) != len(self.timestamps):
            raise ModelError(f"forecast shape {v.shape} does not match the grid/timestamps")
        if not np.all(np.isfinite(v)):
            raise ModelError("forecast contains non-finite values")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)

    def at(self, q: float) -> np.ndarray:
        return self.values[:, self.grid.index_of(q)]


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0) if len(X) else np.zeros(X.shape[1])
        std = X.std(axis=0) if len(X) else np.ones(X.shape[1])
        # columns constant on train carry no information; map them to zero
        return cls(mean, np.where(std > 0, std, np.inf))

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale
