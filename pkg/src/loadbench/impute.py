"""Missing-value filling: linear baseline, pattern KNN, local-level Kalman smoother."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .ingest import SeriesTable

METHODS = ("linear", "knn", "state_space")


class ImputeError(ValueError):
    pass


@dataclass(frozen=True)
class ImputePolicy:
    method: str = "linear"
    k: int = 5
    pattern_hours: int = 24
    process_noise: float = 1.0
    observation_noise: float = 0.01

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown impute method {self.method!r}")
        if self.k < 1 or self.pattern_hours < 1:
            raise ValueError("k and pattern_hours must be >= 1")
        if not (self.process_noise > 0 and self.observation_noise > 0):
            raise ImputeError("noise variances must be positive")


def impute_linear(series) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    obs = np.isfinite(x)
    if not obs.any():
        raise ImputeError("cannot impute an all-missing series")
    idx = np.arange(len(x))
    # np.interp holds edge values constant outside the observed range
    return np.interp(idx, idx[obs], x[obs])


def impute_knn(series, policy: ImputePolicy = ImputePolicy(method="knn")) -> np.ndarray:
    """Fill each gap from the centers of the k most similar complete windows.

    The window around a missing cell spans ``pattern_hours`` positions with the
    cell itself at offset 0.  Distances use only the positions observed around
    the gap; candidates are windows with every cell observed.
    """
    x = np.asarray(series, dtype=float)
    obs = np.isfinite(x)
    if obs.all():
        return x.copy()
    w = policy.pattern_hours
    left = w // 2
    n = len(x)
    if n < w:
        raise ImputeError("series shorter than the pattern window")
    windows = sliding_window_view(x, w)
    complete = np.isfinite(windows).all(axis=1)
    cand = windows[complete]
    if len(cand) == 0:
        raise ImputeError("no complete pattern window to match against")
    offsets = np.arange(w) - left

    out = x.copy()
    for i in np.flatnonzero(~obs):
        pos = i + offsets
        inside = (pos >= 0) & (pos < n)
        use = np.zeros(w, bool)
        use[inside] = obs[pos[inside]]
        if not use.any():
            raise ImputeError(f"no observed neighbours around position {i}")
        d2 = ((cand[:, use] - x[pos[use]]) ** 2).sum(axis=1)
        nearest = np.argsort(d2, kind="stable")[: policy.k]
        out[i] = cand[nearest, left].mean()
    return out


def _local_level_smoother(y: np.ndarray, q: float, r: float) -> np.ndarray:
    n = len(y)
    obs = np.isfinite(y)
    first = np.flatnonzero(obs)[0]
    scale = np.nanvar(y) + q + r
    m_pred = np.empty(n)
    p_pred = np.empty(n)
    m_filt = np.empty(n)
    p_filt = np.empty(n)
    m, p = y[first], 1e6 * scale
    for t in range(n):
        if t > 0:
            p = p + q
        m_pred[t], p_pred[t] = m, p
        if obs[t]:
            gain = p / (p + r)
            m = m + gain * (y[t] - m)
            p = (1 - gain) * p
        m_filt[t], p_filt[t] = m, p
    sm = m_filt.copy()
    for t in range(n - 2, -1, -1):
        c = p_filt[t] / p_pred[t + 1]
        sm[t] = m_filt[t] + c * (sm[t + 1] - m_pred[t + 1])
    return sm


def impute_state_space(series, policy: ImputePolicy = ImputePolicy(method="state_space")) -> np.ndarray:
    """Local-level (random walk plus noise) Kalman filter with RTS smoothing.

    Missing observations skip the update step and receive the smoothed state
    mean; observed cells are returned unchanged.
    """
    if not (policy.process_noise > 0 and policy.observation_noise > 0):
        raise ImputeError("noise variances must be positive")
    y = np.asarray(series, dtype=float)
    obs = np.isfinite(y)
    if obs.sum() < 2:
        raise ImputeError("state-space imputation needs at least two observations")
    if obs.all():
        return y.copy()
    sm = _local_level_smoother(y, policy.process_noise, policy.observation_noise)
    return np.where(obs, y, sm)


def impute(series, policy: ImputePolicy) -> np.ndarray:
    if policy.method == "linear":
        return impute_linear(series)
    if policy.method == "knn":
        return impute_knn(series, policy)
    return impute_state_space(series, policy)


def impute_table(t: SeriesTable, policy: ImputePolicy) -> SeriesTable:
    """Impute load and every covariate column independently."""
    return t.replace(
        load=impute(t.load, policy),
        covariates={k: impute(v, policy) for k, v in t.covariates.items()},
    )
