"""Least-squares cubic regression splines on a clamped B-spline basis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEGREE = 3


class SplineError(ValueError):
    pass


def bspline_basis(x, knots, degree: int = DEGREE) -> np.ndarray:
    """Cox-de Boor basis matrix, shape (len(x), len(knots) - degree - 1).

    The right domain end belongs to the last non-empty knot span.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(knots, dtype=float)
    m = len(t) - 1
    B = ((t[:-1] <= x[:, None]) & (x[:, None] < t[1:])).astype(float)
    last = np.flatnonzero(t[:-1] < t[1:])[-1]
    B[x == t[-1], last] = 1.0
    for d in range(1, degree + 1):
        nb = m - d
        left_den = t[d : d + nb] - t[:nb]
        right_den = t[d + 1 : d + 1 + nb] - t[1 : 1 + nb]
        with np.errstate(divide="ignore", invalid="ignore"):
            lw = np.where(left_den > 0, (x[:, None] - t[:nb]) / left_den, 0.0)
            rw = np.where(right_den > 0, (t[d + 1 : d + 1 + nb] - x[:, None]) / right_den, 0.0)
        B = lw * B[:, :nb] + rw * B[:, 1 : nb + 1]
    return B


def _derivative(knots: np.ndarray, coef: np.ndarray, degree: int):
    t = knots
    den = t[degree + 1 : degree + len(coef)] - t[1 : len(coef)]
    dc = degree * np.diff(coef) / den
    return t[1:-1], dc, degree - 1


@dataclass(frozen=True)
class SplineFit:
    """Piecewise cubic ``s(x) = c0 + c1 u + c2 u^2 + c3 u^3`` with ``u = x - knots[j]``."""

    knots: np.ndarray  # distinct interval edges, domain ends included
    coeffs: np.ndarray  # (len(knots) - 1, 4)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    def _locate(self, x):
        x = np.asarray(x, dtype=float)
        j = np.clip(np.searchsorted(self.knots, x, side="right") - 1, 0, len(self.coeffs) - 1)
        return j, x - self.knots[j]

    def __call__(self, x, nu: int = 0) -> np.ndarray:
        j, u = self._locate(x)
        c = self.coeffs[j]
        if nu == 0:
            return c[..., 0] + u * (c[..., 1] + u * (c[..., 2] + u * c[..., 3]))
        if nu == 1:
            return c[..., 1] + u * (2 * c[..., 2] + 3 * u * c[..., 3])
        if nu == 2:
            return 2 * c[..., 2] + 6 * u * c[..., 3]
        if nu == 3:
            return 6 * c[..., 3]
        raise ValueError("derivative order must be 0..3")


def interior_knots(eps: np.ndarray, n_knots: int) -> np.ndarray:
    if n_knots == 0:
        return np.empty(0)
    probs = np.arange(1, n_knots + 1) / (n_knots + 1)
    return np.quantile(eps, probs)


def default_n_knots(n: int) -> int:
    return min(20, n // 30)


def fit_cubic_spline(epsilon, cost, n_knots: int | None = None) -> SplineFit:
    """Least-squares cubic spline with ``n_knots`` interior knots at ε-quantiles.

    Solves the normal equations of the B-spline basis by Cholesky.
    """
    eps = np.asarray(epsilon, dtype=float)
    y = np.asarray(cost, dtype=float)
    if n_knots is None:
        n_knots = default_n_knots(len(eps))
    if len(eps) < n_knots + 4:
        raise SplineError(f"need at least {n_knots + 4} samples, got {len(eps)}")
    if len(np.unique(eps)) < n_knots + 4:
        raise SplineError("too few distinct epsilon values")
    lo, hi = float(eps.min()), float(eps.max())
    inner = interior_knots(eps, n_knots)
    edges = np.concatenate([[lo], inner, [hi]])
    if np.any(np.diff(edges) <= 0):
        raise SplineError("duplicate knots; singular spline system")
    t = np.concatenate([[lo] * DEGREE, edges, [hi] * DEGREE])
    B = bspline_basis(eps, t)
    try:
        chol = np.linalg.cholesky(B.T @ B)
    except np.linalg.LinAlgError:
        raise SplineError("singular spline normal equations") from None
    coef = np.linalg.solve(chol.T, np.linalg.solve(chol, B.T @ y))

    # Taylor coefficients at each interval's left edge
    left = edges[:-1]
    cols = []
    kt, kc, kd = t, coef, DEGREE
    for order in range(DEGREE + 1):
        cols.append(bspline_basis(left, kt, kd) @ kc / np.prod(np.arange(1, order + 1)))
        if order < DEGREE:
            kt, kc, kd = _derivative(kt, kc, kd)
    return SplineFit(edges, np.column_stack(cols))


def simpson(f_values: np.ndarray, a: float, b: float) -> float:
    n = len(f_values)
    if n < 3 or n % 2 == 0:
        raise ValueError("composite Simpson needs an odd number (>= 3) of points")
    h = (b - a) / (n - 1)
    return float(h / 3 * (f_values[0] + f_values[-1] + 4 * f_values[1:-1:2].sum() + 2 * f_values[2:-1:2].sum()))
