"""Quantile reordering and the per-quantile metric matrix."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from html import escape

import numpy as np

from .models.base import QuantileForecast
from .quantiles import QuantileGrid

MATRIX_COLUMNS = ("pinball", "winkler", "coverage_error", "calibration_error")
CSV_HEADER = ("quantile", "pinball", "winkler", "coverage_error", "calibration_contrib")
DEFAULT_ALPHAS = (0.02, 0.10, 0.20)


class MetricError(ValueError):
    pass


def _aligned(f: QuantileForecast, actual) -> np.ndarray:
    y = np.asarray(actual, dtype=float)
    if y.shape != (len(f),):
        raise MetricError(f"{len(y)} actuals for {len(f)} forecast rows")
    return y


def reorder_quantiles(f: QuantileForecast) -> QuantileForecast:
    return QuantileForecast(f.timestamps, np.sort(f.values, axis=1), f.grid)


def monotonicity_violations(f: QuantileForecast) -> int:
    return int((np.diff(f.values, axis=1) < 0).sum())


def pinball(f: QuantileForecast, actual) -> tuple[np.ndarray, float]:
    """Per-level mean pinball loss and its average over levels."""
    y = _aligned(f, actual)
    q = f.grid.array
    u = y[:, None] - f.values
    per_level = (q * np.maximum(u, 0) + (1 - q) * np.maximum(-u, 0)).mean(axis=0)
    return per_level, float(per_level.mean())


def _winkler(lower, upper, y, alpha):
    width = upper - lower
    below = np.maximum(lower - y, 0)
    above = np.maximum(y - upper, 0)
    return width + 2 * below / alpha + 2 * above / alpha


def winkler(f: QuantileForecast, actual, alpha: float) -> float:
    """Mean Winkler score of the central (1 - alpha) interval."""
    y = _aligned(f, actual)
    if not 0 < alpha < 1:
        raise MetricError("alpha must lie in (0, 1)")
    try:
        lo = f.grid.index_of(alpha / 2)
        hi = f.grid.index_of(1 - alpha / 2)
    except KeyError as e:
        raise MetricError(f"grid lacks the levels for alpha={alpha}") from e
    return float(_winkler(f.values[:, lo], f.values[:, hi], y, alpha).mean())


def winkler_by_level(f: QuantileForecast, actual) -> np.ndarray:
    """Winkler score of the symmetric interval (q, 1 - q) for each level q.

    Levels without a mirror on the grid get NaN; q = 0.5 degenerates to twice
    the absolute error of the median.
    """
    y = _aligned(f, actual)
    q = f.grid.array
    out = np.full(len(q), np.nan)
    for i, level in enumerate(q):
        try:
            j = f.grid.index_of(1 - level)
        except KeyError:
            continue
        lo, hi = sorted((i, j))
        out[i] = _winkler(f.values[:, lo], f.values[:, hi], y, 2 * min(level, 1 - level)).mean()
    return out


def coverage_error(f: QuantileForecast, actual) -> np.ndarray:
    """Per level: share of actuals at or below the forecast, minus the level."""
    y = _aligned(f, actual)
    return (y[:, None] <= f.values).mean(axis=0) - f.grid.array


def calibration_error(f: QuantileForecast, actual) -> float:
    return float(np.abs(coverage_error(f, actual)).mean())


def crps_approx(f: QuantileForecast, actual) -> float:
    if len(f.grid) < 10:
        raise MetricError("CRPS approximation needs at least 10 levels")
    return 2.0 * pinball(f, actual)[1]


def point_metrics(pred, actual, floor: float) -> dict:
    p = np.asarray(pred, dtype=float)
    y = np.asarray(actual, dtype=float)
    if p.shape != y.shape:
        raise MetricError("prediction/actual length mismatch")
    err = p - y
    return {
        "mape": float(100 * np.mean(np.abs(err) / np.maximum(np.abs(y), floor))),
        "mae": float(np.mean(np.abs(err))),
        "rmse": float(np.sqrt(np.mean(err**2))),
    }


@dataclass
class MetricMatrix:
    levels: np.ndarray
    cells: np.ndarray  # (len(levels), len(columns))
    scalars: dict  # crps_approx, mape, mae, rmse
    aggregates: dict = field(default_factory=dict)  # grand pinball, calibration, fixed-alpha Winkler
    columns: tuple = MATRIX_COLUMNS
    meta: dict = field(default_factory=lambda: {"calibration_error": "mean absolute deviation"})

    def column(self, name: str) -> np.ndarray:
        return self.cells[:, self.columns.index(name)]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for q, row in zip(self.levels, self.cells):
                w.writerow([repr(float(q)), *(repr(float(v)) for v in row)])

    @classmethod
    def read_csv(cls, path) -> "MetricMatrix":
        with open(path, encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if tuple(rows[0]) != CSV_HEADER:
            raise MetricError(f"unexpected metric CSV header {rows[0]}")
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        return cls(data[:, 0], data[:, 1:], {})

    def summary(self) -> dict:
        return {"scalars": self.scalars, "aggregates": self.aggregates, "meta": self.meta}

    def to_svg(self, path, title: str = "") -> int:
        """Heatmap with one ``rect.cell`` per matrix cell; columns colour-scaled independently."""
        cw, ch, left, top = 6, 18, 130, 30
        n_rows, n_cols = self.cells.shape
        width, height = left + n_rows * cw + 10, top + n_cols * ch + 30
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
            f'<text x="4" y="18" font-size="12">{escape(title)}</text>',
        ]
        n_cells = 0
        for c in range(n_cols):
            col = self.cells[:, c]
            lo, hi = float(np.min(np.abs(col))), float(np.max(np.abs(col)))
            span = hi - lo if hi > lo else 1.0
            y = top + c * ch
            parts.append(f'<text x="4" y="{y + 13}" font-size="11">{self.columns[c]}</text>')
            for r in range(n_rows):
                t = (abs(col[r]) - lo) / span
                shade = int(round(255 * (1 - t)))
                parts.append(
                    f'<rect class="cell" x="{left + r * cw}" y="{y}" width="{cw}" height="{ch - 2}" '
                    f'fill="rgb(255,{shade},{shade})"><title>q={self.levels[r]:g} '
                    f"{self.columns[c]}={col[r]:.6g}</title></rect>"
                )
                n_cells += 1
        parts.append(f'<text x="{left}" y="{height - 8}" font-size="11">quantile level &#8594;</text>')
        parts.append("</svg>")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(parts))
        return n_cells


def metric_matrix(f: QuantileForecast, actual, alphas=DEFAULT_ALPHAS, point_floor: float | None = None) -> MetricMatrix:
    """Assemble per-level metrics plus scalar summaries.

    The median level (or the middle grid level) provides the point forecast
    for MAPE, MAE and RMSE.
    """
    y = _aligned(f, actual)
    per_pinball, grand = pinball(f, actual)
    cov = coverage_error(f, actual)
    wk = winkler_by_level(f, actual)
    wk = np.where(np.isnan(wk), 0.0, wk)
    cells = np.column_stack([per_pinball, wk, cov, np.abs(cov)])
    aggregates = {"pinball": grand, "calibration_error": float(np.abs(cov).mean())}
    for a in alphas:
        aggregates[f"winkler_a{round(a * 100):02d}"] = winkler(f, actual, a)
    median = f.at(0.5) if any(abs(q - 0.5) < 1e-9 for q in f.grid.levels) else f.values[:, len(f.grid) // 2]
    floor = point_floor if point_floor is not None else 0.01 * float(np.mean(np.abs(y)))
    scalars = {"crps_approx": crps_approx(f, actual), **point_metrics(median, y, max(floor, 1e-12))}
    if not (np.all(np.isfinite(cells)) and all(np.isfinite(v) for v in [*scalars.values(), *aggregates.values()])):
        raise MetricError("non-finite metric value")
    return MetricMatrix(f.grid.array.copy(), cells, scalars, aggregates)


def summary_json(m: MetricMatrix, path, extra: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({**m.summary(), **(extra or {})}, fh, indent=2, sort_keys=True)


__all__ = [
    "MetricMatrix",
    "QuantileGrid",
    "calibration_error",
    "coverage_error",
    "crps_approx",
    "metric_matrix",
    "monotonicity_violations",
    "pinball",
    "point_metrics",
    "reorder_quantiles",
    "winkler",
    "winkler_by_level",
]
