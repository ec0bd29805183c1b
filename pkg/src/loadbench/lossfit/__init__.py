"""Data-fitted differentiable asymmetric losses over the forecasting-error percentage."""

from .piecewise import (
    AsymmetricLoss,
    LossFit,
    LossFitError,
    PiecewiseLinearLoss,
    compute_fep,
    curvature_integral,
    eval_loss,
    fit_loss,
    fit_piecewise_linear,
    hinge_residual,
    normalize_costs,
    place_breakpoints,
    required_segments,
    segment_error_bound,
    smooth_breakpoints,
    training_loss_adapter,
)
from .simulate import CostSamples, CostShape, simulate_cost_curve
from .spline import SplineError, SplineFit, bspline_basis, fit_cubic_spline, simpson

__all__ = [
    "AsymmetricLoss",
    "CostSamples",
    "CostShape",
    "LossFit",
    "LossFitError",
    "PiecewiseLinearLoss",
    "SplineError",
    "SplineFit",
    "bspline_basis",
    "compute_fep",
    "curvature_integral",
    "eval_loss",
    "fit_cubic_spline",
    "fit_loss",
    "fit_piecewise_linear",
    "hinge_residual",
    "normalize_costs",
    "place_breakpoints",
    "required_segments",
    "segment_error_bound",
    "simpson",
    "simulate_cost_curve",
    "smooth_breakpoints",
    "training_loss_adapter",
]
