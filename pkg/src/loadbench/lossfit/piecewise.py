"""Piecewise-linear cost losses: segment count, breakpoints, hinge fit, C1 smoothing."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .spline import SplineFit, simpson

SQRT120 = math.sqrt(120.0)


class LossFitError(ValueError):
    pass


def compute_fep(forecast, actual, floor: float):
    """Forecasting error percentage ``(f - y) / max(|y|, floor)``."""
    if not floor > 0:
        raise ValueError("floor must be positive")
    actual = np.asarray(actual, dtype=float)
    return (np.asarray(forecast, dtype=float) - actual) / np.maximum(np.abs(actual), floor)


def normalize_costs(costs) -> np.ndarray:
    c = np.asarray(costs, dtype=float)
    lo, hi = c.min(), c.max()
    if not hi > lo:
        raise LossFitError("costs are all equal; nothing to normalize")
    return (c - lo) / (hi - lo)


def curvature_integral(s: SplineFit, n_points: int = 1001) -> float:
    """``A = (∫ |s''|^(2/5) dε)^(5/2)`` over the spline domain, composite Simpson."""
    n_points += 1 - n_points % 2
    a, b = s.domain
    x = np.linspace(a, b, n_points)
    integral = simpson(np.abs(s(x, nu=2)) ** 0.4, a, b)
    if not np.isfinite(integral):
        raise LossFitError("non-finite curvature integral")
    return integral**2.5


def segment_error_bound(A: float, K: int) -> float:
    return A / (SQRT120 * K**2)


def required_segments(s: SplineFit, tolerance: float, n_points: int = 1001) -> int:
    """Smallest K whose L2 error bound ``A / (sqrt(120) K^2)`` is within tolerance."""
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    A = curvature_integral(s, n_points)
    return max(1, math.ceil(math.sqrt(A / (SQRT120 * tolerance))))


def place_breakpoints(epsilons, K: int) -> np.ndarray:
    """K-1 breakpoints splitting the sorted samples into K near-equal cells.

    Breakpoint j sits midway between order statistics ``ceil(j n / K)`` and the
    next one, so no sample lies on a breakpoint.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    e = np.sort(np.asarray(epsilons, dtype=float))
    if K == 1:
        return np.empty(0)
    if K - 1 >= len(np.unique(e)):
        raise LossFitError(f"{K - 1} breakpoints need more distinct samples than {len(np.unique(e))}")
    n = len(e)
    m = np.array([math.ceil(j * n / K) for j in range(1, K)])
    b = (e[m - 1] + e[m]) / 2
    if np.any(np.diff(b) <= 0) or np.any(e[m - 1] == e[m]):
        raise LossFitError("tied samples straddle a breakpoint; reduce K")
    return b


@dataclass(frozen=True)
class PiecewiseLinearLoss:
    """Continuous piecewise-linear function, optionally smoothed at breakpoints.

    Segment j covers ``(b[j-1], b[j]]`` and equals ``intercepts[j] + slopes[j] * ε``.
    With ``delta > 0`` each kink is replaced on ``[b - delta, b + delta]`` by the
    quadratic matching value and slope at both cell edges.  Outside the fit
    domain the edge segments continue affinely.
    """

    breakpoints: tuple
    slopes: tuple
    intercepts: tuple
    delta: float
    domain: tuple

    def __post_init__(self):
        for name in ("breakpoints", "slopes", "intercepts", "domain"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if len(self.slopes) != len(self.breakpoints) + 1 or len(self.intercepts) != len(self.slopes):
            raise LossFitError("need one more segment than breakpoints")

    @property
    def K(self) -> int:
        return len(self.slopes)

    def _arrays(self):
        return np.array(self.breakpoints), np.array(self.slopes), np.array(self.intercepts)

    def vertex_values(self) -> np.ndarray:
        b, m, c = self._arrays()
        return c[:-1] + m[:-1] * b

    def affine(self, eps):
        b, m, c = self._arrays()
        seg = np.searchsorted(b, eps, side="left")
        return c[seg] + m[seg] * eps, m[seg]

    def quadratic(self, j: int, eps):
        """Smoothing quadratic around breakpoint j (value, derivative)."""
        b, m, _ = self._arrays()
        d = self.delta
        v = self.vertex_values()[j]
        m1, m2 = m[j], m[j + 1]
        u = eps - b[j] + d
        return v - m1 * d + m1 * u + (m2 - m1) * u**2 / (4 * d), m1 + (m2 - m1) * u / (2 * d)

    def evaluate(self, eps):
        eps = np.asarray(eps, dtype=float)
        value, deriv = self.affine(eps)
        value, deriv = np.array(value, dtype=float), np.array(deriv, dtype=float)
        if self.delta > 0 and self.breakpoints:
            b = np.array(self.breakpoints)
            near = np.clip(np.searchsorted(b, eps), 0, len(b) - 1)
            # the nearest breakpoint is either at index near or near - 1
            alt = np.clip(near - 1, 0, len(b) - 1)
            j = np.where(np.abs(eps - b[alt]) < np.abs(eps - b[near]), alt, near)
            cell = np.abs(eps - b[j]) <= self.delta
            if np.any(cell):
                for jj in np.unique(j[cell]):
                    sel = cell & (j == jj)
                    qv, qd = self.quadratic(int(jj), eps[sel])
                    value[sel], deriv[sel] = qv, qd
        return value, deriv

    def __call__(self, eps):
        return self.evaluate(eps)[0]

    def to_json(self) -> str:
        return json.dumps(
            {
                "breakpoints": list(self.breakpoints),
                "slopes": list(self.slopes),
                "intercepts": list(self.intercepts),
                "delta": self.delta,
                "domain": list(self.domain),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PiecewiseLinearLoss":
        d = json.loads(text)
        return cls(d["breakpoints"], d["slopes"], d["intercepts"], d["delta"], d["domain"])

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "PiecewiseLinearLoss":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def eval_loss(L: PiecewiseLinearLoss, epsilon):
    """Value and exact first derivative at ``epsilon``."""
    value, deriv = L.evaluate(epsilon)
    if np.ndim(epsilon) == 0:
        return float(value), float(deriv)
    return value, deriv


def hinge_design(eps: np.ndarray, breakpoints) -> np.ndarray:
    cols = [np.ones_like(eps), eps] + [np.maximum(eps - b, 0.0) for b in breakpoints]
    return np.column_stack(cols)


def hinge_residual(epsilon, cost, breakpoints) -> float:
    """Residual sum of squares of the least-squares hinge fit."""
    X = hinge_design(np.asarray(epsilon, float), breakpoints)
    beta, *_ = np.linalg.lstsq(X, cost, rcond=None)
    r = cost - X @ beta
    return float(r @ r)


def fit_piecewise_linear(epsilon, cost, breakpoints) -> PiecewiseLinearLoss:
    """Continuous linear-spline least squares on the hinge basis (unsmoothed)."""
    eps = np.asarray(epsilon, dtype=float)
    y = np.asarray(cost, dtype=float)
    b = np.asarray(breakpoints, dtype=float)
    cells = np.searchsorted(b, eps, side="left")
    counts = np.bincount(cells, minlength=len(b) + 1)
    if np.any(counts < 2):
        raise LossFitError(f"every cell needs >= 2 samples, got counts {counts.tolist()}")
    X = hinge_design(eps, b)
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise LossFitError("singular hinge normal equations")
    kinks = beta[2:]
    slopes = beta[1] + np.concatenate([[0.0], np.cumsum(kinks)])
    intercepts = beta[0] - np.concatenate([[0.0], np.cumsum(kinks * b)])
    return PiecewiseLinearLoss(b, slopes, intercepts, 0.0, (eps.min(), eps.max()))


def min_spacing(L: PiecewiseLinearLoss) -> float:
    edges = np.concatenate([[L.domain[0]], L.breakpoints, [L.domain[1]]])
    return float(np.diff(edges).min())


def smooth_breakpoints(L: PiecewiseLinearLoss, delta: float | None = None) -> PiecewiseLinearLoss:
    """Replace each kink by a C1 quadratic on ``[b - delta, b + delta]``.

    Defaults to a quarter of the minimum spacing between breakpoints and
    domain edges.
    """
    spacing = min_spacing(L)
    if delta is None:
        delta = 0.25 * spacing
    if not 0 < delta < spacing / 2:
        raise LossFitError(f"delta={delta} must be positive and below half the spacing {spacing}")
    return replace(L, delta=float(delta))


@dataclass
class LossFit:
    spline: SplineFit
    K: int
    bound: float
    unsmoothed: PiecewiseLinearLoss
    loss: PiecewiseLinearLoss


def fit_loss(epsilon, cost, tolerance: float = 0.01, n_knots: int | None = None, delta: float | None = None,
             normalize: bool = True) -> LossFit:
    """Full pipeline from (ε, cost) samples to a smoothed, trainable loss."""
    from .spline import fit_cubic_spline

    eps = np.asarray(epsilon, dtype=float)
    c = normalize_costs(cost) if normalize else np.asarray(cost, dtype=float)
    s = fit_cubic_spline(eps, c, n_knots)
    K = required_segments(s, tolerance)
    bps = place_breakpoints(eps, K)
    raw = fit_piecewise_linear(eps, c, bps)
    return LossFit(s, K, segment_error_bound(curvature_integral(s), K), raw, smooth_breakpoints(raw, delta))


class AsymmetricLoss:
    """Training-loss adapter: chain rule through the FEP coordinate."""

    name = "asymmetric"

    def __init__(self, L: PiecewiseLinearLoss, floor: float):
        self.L = L
        self.floor = float(floor)

    def __call__(self, forecast, actual):
        return training_loss_adapter(self.L, forecast, actual, self.floor)


def training_loss_adapter(L: PiecewiseLinearLoss, forecast, actual, floor: float):
    eps = compute_fep(forecast, actual, floor)
    value, deriv = L.evaluate(eps)
    grad = deriv / np.maximum(np.abs(np.asarray(actual, dtype=float)), floor)
    if np.ndim(eps) == 0:
        return float(value), float(grad)
    return value, grad
