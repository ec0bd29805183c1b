"""One-hidden-layer feed-forward network trained with mini-batch Adam.

Two wirings:

* plain: every feature block feeds the softplus hidden layer, whose output
  feeds the affine head.
* trend concat: only the lag block feeds the hidden layer; its output is
  concatenated with the calendar/temperature/coupled blocks before the head.

``output_mode="quantile_grid"`` fits one linear head per grid level on the
summed pinball loss; ``output_mode="point"`` fits a single head on any
:class:`TrainingLoss` (MSE, or a fitted asymmetric loss).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from ..features import DayAheadMatrix
from ..quantiles import QuantileGrid, empirical_quantiles
from .base import ModelError, QuantileForecast, Standardizer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NetConfig:
    hidden_width: int = 64
    epochs: int = 100
    learning_rate: float = 1e-3
    batch_size: int = 128
    seed: int = 0
    trend_concat: bool = False
    output_mode: str = "quantile_grid"

    def __post_init__(self):
        if self.hidden_width < 1 or self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("network hyperparameters must be positive")
        if self.output_mode not in ("quantile_grid", "point"):
            raise ValueError(f"unknown output_mode {self.output_mode!r}")


class TrainingLoss(Protocol):
    def __call__(self, forecast: np.ndarray, actual: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-sample loss values and their derivatives w.r.t. ``forecast``."""


class MSELoss:
    name = "mse"

    def __call__(self, forecast, actual):
        r = forecast - actual
        return r**2, 2 * r


def softplus(z):
    return np.logaddexp(0.0, z)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def init_params(n_hidden_in: int, n_skip: int, n_out: int, width: int, rng) -> dict:
    fan = n_hidden_in + width
    return {
        "W1": rng.normal(0.0, np.sqrt(2.0 / max(fan, 1)), size=(n_hidden_in, width)),
        "b1": np.zeros(width),
        "W2": rng.normal(0.0, np.sqrt(1.0 / (width + n_skip + n_out)), size=(width + n_skip, n_out)) * 0.1,
        "b2": np.zeros(n_out),
    }


def forward(params: dict, Xh: np.ndarray, Xs: np.ndarray):
    a = Xh @ params["W1"] + params["b1"]
    h = softplus(a)
    z = np.hstack([h, Xs]) if Xs.shape[1] else h
    return z @ params["W2"] + params["b2"], (a, z)


def backward(params: dict, Xh: np.ndarray, cache, d_out: np.ndarray) -> dict:
    a, z = cache
    width = params["b1"].shape[0]
    dz = d_out @ params["W2"].T
    da = dz[:, :width] * sigmoid(a)
    return {
        "W1": Xh.T @ da,
        "b1": da.sum(axis=0),
        "W2": z.T @ d_out,
        "b2": d_out.sum(axis=0),
    }


def pinball_grid_loss(out: np.ndarray, y: np.ndarray, levels: np.ndarray):
    """Batch mean of the pinball loss summed over levels, and its output gradient."""
    u = y[:, None] - out
    loss = np.maximum(levels * u, (levels - 1) * u).sum(axis=1).mean()
    d_out = ((u < 0).astype(float) - levels) / len(y)
    return loss, d_out


def loss_and_grad(params, Xh, Xs, y, levels=None, loss: TrainingLoss | None = None, scale: float = 1.0):
    """Objective and parameter gradients on one batch (targets already scaled).

    Quantile mode when ``levels`` is given; otherwise ``loss`` is applied to
    forecasts and actuals mapped back to original units by ``scale``.
    """
    out, cache = forward(params, Xh, Xs)
    if levels is not None:
        value, d_out = pinball_grid_loss(out, y, levels)
    else:
        vals, dpred = loss(out[:, 0] * scale, y * scale)
        value = vals.mean()
        d_out = (dpred * scale / len(y))[:, None]
    return value, backward(params, Xh, cache, d_out)


class _Adam:
    def __init__(self, params, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads, lr=None):
        lr = self.lr if lr is None else lr
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            params[k] -= lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


@dataclass
class FittedNet:
    config: NetConfig
    params: dict
    std_h: Standardizer
    std_s: Standardizer
    scale: float
    history: list

    def predict(self, Xh: np.ndarray, Xs: np.ndarray) -> np.ndarray:
        out, _ = forward(self.params, self.std_h(Xh), self.std_s(Xs))
        return out * self.scale


def _target_scale(y: np.ndarray) -> float:
    m = float(np.mean(y))
    if m > 0:
        return m
    fallback = float(np.mean(np.abs(y)))
    return fallback if fallback > 0 else 1.0


def train_net(
    Xh: np.ndarray,
    Xs: np.ndarray,
    y: np.ndarray,
    config: NetConfig,
    levels: np.ndarray | None = None,
    loss: TrainingLoss | None = None,
) -> FittedNet:
    """Fit the network on raw arrays; ``Xh`` feeds the hidden layer, ``Xs`` skips it."""
    if (levels is None) == (loss is None):
        raise ValueError("pass exactly one of levels (quantile heads) or loss (point head)")
    rng = np.random.default_rng(config.seed)
    std_h, std_s = Standardizer.fit(Xh), Standardizer.fit(Xs)
    H, S = std_h(Xh), std_s(Xs)
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(S))):
        raise ModelError("non-finite standardized features")
    scale = _target_scale(y)
    ys = y / scale
    n_out = len(levels) if levels is not None else 1
    params = init_params(H.shape[1], S.shape[1], n_out, config.hidden_width, rng)
    params["b2"][:] = empirical_quantiles(ys, levels) if levels is not None else ys.mean()
    opt = _Adam(params, config.learning_rate)
    history = []
    n = len(ys)
    steps_per_epoch = -(-n // config.batch_size)
    total_steps = max(config.epochs * steps_per_epoch, 1)
    step = 0
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        total = 0.0
        for s in range(0, n, config.batch_size):
            b = perm[s : s + config.batch_size]
            value, grads = loss_and_grad(params, H[b], S[b], ys[b], levels, loss, scale)
            if not np.isfinite(value):
                raise ModelError(f"training diverged (non-finite loss) at epoch {epoch}")
            # cosine annealing: pinball gradients do not vanish at the optimum,
            # so a constant step leaves the heads jittering around it
            opt.step(params, grads, 0.5 * config.learning_rate * (1 + np.cos(np.pi * step / total_steps)))
            step += 1
            total += value * len(b)
        history.append(total / n)
        logger.debug("epoch %d loss %.6g", epoch, history[-1])
    return FittedNet(config, params, std_h, std_s, scale, history)


def _blocks(m: DayAheadMatrix, trend_concat: bool):
    if trend_concat:
        return m.lag_block, m.context_block
    return m.X, np.zeros((len(m), 0))


def fit_predict_ffnn(
    train: DayAheadMatrix,
    test: DayAheadMatrix,
    grid: QuantileGrid,
    config: NetConfig = NetConfig(),
    loss: TrainingLoss | None = None,
):
    """Quantile forecast (quantile_grid mode) or point-forecast array (point mode)."""
    Xh, Xs = _blocks(train, config.trend_concat)
    if config.output_mode == "quantile_grid":
        net = train_net(Xh, Xs, train.target, config, levels=grid.array)
        Th, Ts = _blocks(test, config.trend_concat)
        return QuantileForecast(test.timestamps, net.predict(Th, Ts), grid)
    net = train_net(Xh, Xs, train.target, config, loss=loss or MSELoss())
    Th, Ts = _blocks(test, config.trend_concat)
    return net.predict(Th, Ts)[:, 0]
