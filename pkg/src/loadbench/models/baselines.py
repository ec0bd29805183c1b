"""Empirical-distribution baselines: global/moving quantiles, error-based models, KNN."""

from __future__ import annotations

import numpy as np

from ..features import DayAheadMatrix
from ..quantiles import QuantileGrid, empirical_quantiles
from .base import ModelError, QuantileForecast, Standardizer

DAY = np.timedelta64(24, "h")
RIDGE = 1e-8


def _check_train(train: DayAheadMatrix):
    if len(train) == 0:
        raise ModelError("empty training matrix")


def fit_predict_beq(train: DayAheadMatrix, test: DayAheadMatrix, grid: QuantileGrid) -> QuantileForecast:
    """Every test row gets the empirical quantiles of all training targets."""
    _check_train(train)
    q = empirical_quantiles(train.target, grid.levels)
    return QuantileForecast(test.timestamps, np.tile(q, (len(test), 1)), grid)


def _history(*mats: DayAheadMatrix) -> dict:
    """Realized hourly loads keyed by timestamp, from targets and lag blocks."""
    hist = {}
    for m in mats:
        for k in range(m.lag_block.shape[1]):
            back = (m.lag_block.shape[1] - k) * DAY
            for ts, v in zip(m.timestamps - back, m.lag_block[:, k]):
                hist.setdefault(ts, v)
        for ts, v in zip(m.timestamps, m.target):
            hist[ts] = v
    return hist


def fit_predict_bmq(
    train: DayAheadMatrix, test: DayAheadMatrix, grid: QuantileGrid, window_days: int = 30
) -> QuantileForecast:
    """Quantiles of the same-hour loads over the ``window_days`` preceding days.

    The window rolls through the test period on realized values.
    """
    if window_days < 1:
        raise ModelError("window_days must be >= 1")
    _check_train(train)
    hist = _history(train, test)
    offsets = np.arange(1, window_days + 1) * DAY
    rows = []
    for ts in test.timestamps:
        try:
            rows.append([hist[ts - off] for off in offsets])
        except KeyError:
            raise ModelError(
                f"window of {window_days} days exceeds available history at {ts}"
            ) from None
    values = empirical_quantiles(np.array(rows).reshape(len(test), window_days), grid.levels)
    return QuantileForecast(test.timestamps, values, grid)


def fit_predict_bcep(train: DayAheadMatrix, test: DayAheadMatrix, grid: QuantileGrid) -> QuantileForecast:
    """Previous-day persistence plus empirical quantiles of its training errors."""
    _check_train(train)
    errors = train.target - train.lag_block[:, -1]
    offsets = empirical_quantiles(errors, grid.levels)
    return QuantileForecast(test.timestamps, test.lag_block[:, -1:] + offsets[None, :], grid)


def ols_fit(X: np.ndarray, y: np.ndarray):
    """Least squares on standardized features with a tiny ridge on the normal equations.

    Returns a predictor closure.
    """
    std = Standardizer.fit(X)
    Z = std(X)
    y_mean = y.mean()
    A = Z.T @ Z + RIDGE * np.eye(Z.shape[1])
    beta = np.linalg.solve(A, Z.T @ (y - y_mean))
    if not np.all(np.isfinite(beta)):
        raise ModelError("non-finite least-squares solution")
    return lambda Xn: std(Xn) @ beta + y_mean


def fit_predict_qce(train: DayAheadMatrix, test: DayAheadMatrix, grid: QuantileGrid) -> QuantileForecast:
    """Linear regression point forecast plus empirical quantiles of training residuals."""
    _check_train(train)
    predict = ols_fit(train.X, train.target)
    resid = train.target - predict(train.X)
    offsets = empirical_quantiles(resid, grid.levels)
    return QuantileForecast(test.timestamps, predict(test.X)[:, None] + offsets[None, :], grid)


def fit_predict_qknn(
    train: DayAheadMatrix, test: DayAheadMatrix, grid: QuantileGrid, k: int = 20, chunk: int = 512
) -> QuantileForecast:
    _check_train(train)
    if k > len(train):
        raise ModelError(f"k={k} exceeds {len(train)} training rows")
    std = Standardizer.fit(train.X)
    A = std(train.X)
    B = std(test.X)
    a2 = (A**2).sum(axis=1)
    out = np.empty((len(test), len(grid)))
    for s in range(0, len(test), chunk):
        b = B[s : s + chunk]
        d2 = a2[None, :] - 2 * b @ A.T + (b**2).sum(axis=1)[:, None]
        # exact duplicates must come out at distance zero
        d2 = np.maximum(d2, 0.0)
        nn = np.argsort(d2, axis=1, kind="stable")[:, :k]
        out[s : s + chunk] = empirical_quantiles(train.target[nn], grid.levels)
    return QuantileForecast(test.timestamps, out, grid)
