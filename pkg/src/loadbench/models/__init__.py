"""Forecaster zoo keyed by benchmark name.

A ``_T`` suffix selects the coupled calendar x temperature feature blocks;
the plain name uses raw calendar integers and raw temperature.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..features import DayAheadMatrix
from ..quantiles import QuantileGrid
from .base import ModelError, QuantileForecast, Standardizer
from .baselines import (
    fit_predict_bcep,
    fit_predict_beq,
    fit_predict_bmq,
    fit_predict_qce,
    fit_predict_qknn,
)
from .ffnn import MSELoss, NetConfig, TrainingLoss, fit_predict_ffnn, train_net
from .forest import ForestConfig, QuantileForestModel, fit_forest, predict_forest

MODEL_NAMES = (
    "BEQ", "BMQ", "BCEP",
    "QCE", "QCE_T", "QKNNR", "QKNNR_T",
    "QRFR", "QRFR_T", "QSRFR", "QSRFR_T",
    "QERT", "QERT_T", "QSERT", "QSERT_T",
    "FFNN", "FFNN_T",
)  # fmt: skip
DEEP_MODELS = ("FFNN", "FFNN_T")

_FOREST_VARIANTS = {
    "QRFR": ("best", "all"),
    "QSRFR": ("best", "sample"),
    "QERT": ("random", "all"),
    "QSERT": ("random", "sample"),
}


@dataclass(frozen=True)
class ModelOptions:
    forest: ForestConfig = field(default_factory=ForestConfig)
    net: NetConfig = field(default_factory=NetConfig)
    knn_k: int = 20
    window_days: int = 30


def base_name(name: str) -> str:
    return name[:-2] if name.endswith("_T") else name


def uses_coupling(name: str) -> bool:
    return name.endswith("_T")


def is_deep(name: str) -> bool:
    return base_name(name) == "FFNN"


def check_name(name: str) -> None:
    if name not in MODEL_NAMES:
        raise ModelError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")


def fit_predict(
    name: str,
    train: DayAheadMatrix,
    test: DayAheadMatrix,
    grid: QuantileGrid = QuantileGrid(),
    options: ModelOptions = ModelOptions(),
    loss: TrainingLoss | None = None,
):
    """Fit ``name`` on ``train`` and forecast ``test``.

    Returns a :class:`QuantileForecast`, or a point-forecast array when the
    FFNN is configured with ``output_mode="point"``.
    """
    check_name(name)
    base = base_name(name)
    if base == "BEQ":
        return fit_predict_beq(train, test, grid)
    if base == "BMQ":
        return fit_predict_bmq(train, test, grid, options.window_days)
    if base == "BCEP":
        return fit_predict_bcep(train, test, grid)
    if base == "QCE":
        return fit_predict_qce(train, test, grid)
    if base == "QKNNR":
        return fit_predict_qknn(train, test, grid, options.knn_k)
    if base in _FOREST_VARIANTS:
        split_rule, leaf_mode = _FOREST_VARIANTS[base]
        cfg = replace(options.forest, split_rule=split_rule, leaf_mode=leaf_mode)
        return predict_forest(fit_forest(train, cfg), test, grid)
    cfg = replace(options.net, trend_concat=uses_coupling(name))
    return fit_predict_ffnn(train, test, grid, cfg, loss)


__all__ = [
    "DEEP_MODELS",
    "MODEL_NAMES",
    "ForestConfig",
    "MSELoss",
    "ModelError",
    "ModelOptions",
    "NetConfig",
    "QuantileForecast",
    "QuantileForestModel",
    "Standardizer",
    "TrainingLoss",
    "base_name",
    "check_name",
    "fit_forest",
    "fit_predict",
    "fit_predict_bcep",
    "fit_predict_beq",
    "fit_predict_bmq",
    "fit_predict_ffnn",
    "fit_predict_qce",
    "fit_predict_qknn",
    "is_deep",
    "predict_forest",
    "train_net",
    "uses_coupling",
]
