"""Quantile grid and the left-continuous empirical quantile used by every model.

All estimators return ``inf{y : F(y) >= q}``.  Levels are compared exactly as
the decimals they are written as (0.07 means 7/100), so rank arithmetic never
suffers from binary rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


def default_levels() -> tuple[float, ...]:
    return tuple(round(j / 100, 2) for j in range(1, 100))


def exact_level(q: float) -> Fraction:
    return Fraction(repr(float(q)))


@dataclass(frozen=True)
class QuantileGrid:
    levels: tuple[float, ...] = field(default_factory=default_levels)

    def __post_init__(self):
        lv = tuple(float(q) for q in self.levels)
        if not lv or any(not 0.0 < q < 1.0 for q in lv):
            raise ValueError("levels must lie in (0, 1)")
        if any(b <= a for a, b in zip(lv, lv[1:])):
            raise ValueError("levels must be strictly increasing")
        object.__setattr__(self, "levels", lv)

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.levels)

    def index_of(self, q: float, tol: float = 1e-9) -> int:
        hits = np.flatnonzero(np.abs(self.array - q) < tol)
        if len(hits) == 0:
            raise KeyError(f"level {q} not on the grid")
        return int(hits[0])


def ranks(levels, n: int) -> np.ndarray:
    """0-based order-statistic index ``ceil(q n) - 1`` for each level."""
    return np.array([max(math.ceil(exact_level(q) * n), 1) - 1 for q in levels])


def empirical_quantiles(values, levels) -> np.ndarray:
    """Quantiles along the last axis of ``values``."""
    v = np.sort(np.asarray(values, dtype=float), axis=-1)
    n = v.shape[-1]
    if n == 0:
        raise ValueError("empirical quantile of an empty sample")
    return v[..., ranks(levels, n)]

