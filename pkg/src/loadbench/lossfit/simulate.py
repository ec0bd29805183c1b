"""Polynomial error-cost generator standing in for recorded dispatch costs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .piecewise import LossFitError, normalize_costs


@dataclass(frozen=True)
class CostShape:
    """Cost polynomial ``sum(coeffs[i] * ε**i)`` on ``interval``, clipped at zero.

    The default penalizes over-forecasts (ε > 0) more than under-forecasts.
    """

    coeffs: tuple = (0.0, 0.0, 1.5, 0.8)
    interval: tuple = (-0.5, 0.5)

    def polynomial(self, eps):
        return np.polynomial.polynomial.polyval(eps, self.coeffs)

    def true_cost(self, eps):
        return np.maximum(self.polynomial(eps), 0.0)

    def validate(self) -> None:
        lo, hi = self.interval
        if not lo < hi:
            raise LossFitError("empty cost interval")
        grid = np.linspace(lo, hi, 2001)
        c = self.true_cost(grid)
        if np.ptp(c) == 0:
            raise LossFitError("cost shape is constant on the interval")
        slope = np.polynomial.polynomial.polyval(grid, np.polynomial.polynomial.polyder(self.coeffs))
        # increasing in |ε|: slope has the sign of ε wherever the cost is positive
        if np.any((grid * slope < -1e-12) & (c > 0)):
            raise LossFitError("cost shape must be non-decreasing in |epsilon| on the interval")


@dataclass(frozen=True)
class CostSamples:
    epsilon: np.ndarray
    cost: np.ndarray


def simulate_cost_curve(shape: CostShape = CostShape(), n: int = 2000, noise: float = 0.01, seed: int = 0) -> CostSamples:
    """Uniform ε samples with noisy polynomial costs, min-max normalized."""
    if n < 10:
        raise ValueError("need n >= 10 samples")
    shape.validate()
    rng = np.random.default_rng(seed)
    eps = rng.uniform(*shape.interval, size=n)
    cost = shape.true_cost(eps) + noise * rng.standard_normal(n)
    return CostSamples(eps, normalize_costs(cost))
