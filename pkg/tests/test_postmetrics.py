import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import hourly
from loadbench.models.base import QuantileForecast
from loadbench.postmetrics import (
    CSV_HEADER,
    MetricError,
    MetricMatrix,
    calibration_error,
    coverage_error,
    crps_approx,
    metric_matrix,
    monotonicity_violations,
    pinball,
    point_metrics,
    reorder_quantiles,
    winkler,
    winkler_by_level,
)
from loadbench.quantiles import QuantileGrid

GRID = QuantileGrid()


def fc(values, levels=None):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    grid = GRID if levels is None else QuantileGrid(tuple(levels))
    return QuantileForecast(hourly(len(values)), values, grid)


def ideal_uniform(n, seed):
    """Exact conditional quantiles of y = x + U(-1, 1) and matching draws."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 10, n)
    y = x + rng.uniform(-1, 1, n)
    q = GRID.array
    return fc(x[:, None] + (2 * q - 1)[None, :]), y


def test_reorder_examples():
    f = reorder_quantiles(fc([[5, 3, 4]], (0.1, 0.5, 0.9)))
    np.testing.assert_array_equal(f.values, [[3, 4, 5]])
    g = fc([[1, 2, 3]], (0.1, 0.5, 0.9))
    np.testing.assert_array_equal(reorder_quantiles(g).values, g.values)


@settings(max_examples=50, deadline=None)
@given(arrays(float, (7, 5), elements=st.floats(-1e6, 1e6)))
def test_reorder_is_a_sorting_permutation(values):
    f = reorder_quantiles(fc(values, (0.1, 0.3, 0.5, 0.7, 0.9)))
    assert monotonicity_violations(f) == 0
    np.testing.assert_array_equal(np.sort(values, axis=1), f.values)


def test_pinball_examples():
    levels = (0.1, 0.9)
    per, grand = pinball(fc([[10, 10]], levels), [10])
    assert grand == 0
    per, _ = pinball(fc([[0, 8]], levels), [10])
    assert per[1] == pytest.approx(1.8)
    per, _ = pinball(fc([[0, 12]], levels), [10])
    assert per[1] == pytest.approx(0.2)
    with pytest.raises(MetricError):
        pinball(fc([[0, 12]], levels), [10, 11])


@settings(max_examples=50, deadline=None)
@given(arrays(float, (6, 3), elements=st.floats(-100, 100)), arrays(float, 6, elements=st.floats(-100, 100)))
def test_pinball_nonnegative(values, y):
    per, _ = pinball(fc(values, (0.2, 0.5, 0.8)), y)
    assert np.all(per >= 0)


def test_winkler_examples():
    f = fc([[10, 15, 20]], (0.05, 0.5, 0.95))
    assert winkler(f, [15], 0.1) == 10
    assert winkler(f, [25], 0.1) == pytest.approx(110)
    assert winkler(f, [9], 0.1) == pytest.approx(30)
    with pytest.raises(MetricError):
        winkler(f, [9], 0.2)


@settings(max_examples=50, deadline=None)
@given(arrays(float, 20, elements=st.floats(-50, 50)))
def test_winkler_at_least_width(y):
    f = fc(np.tile([-10.0, 0.0, 10.0], (20, 1)), (0.1, 0.5, 0.9))
    w = winkler(f, y, 0.2)
    assert w >= 20 - 1e-12
    assert (w == 20) == bool(np.all(np.abs(y) <= 10))


def test_winkler_by_level_uses_symmetric_interval():
    f = fc([[10, 15, 20]], (0.05, 0.5, 0.95))
    wk = winkler_by_level(f, [25])
    assert wk[0] == pytest.approx(110) and wk[2] == pytest.approx(110)
    assert wk[1] == pytest.approx(2 * 10 / 1.0)


def test_coverage_examples():
    y = np.arange(10.0)
    assert coverage_error(fc(np.full((10, 1), y.max() + 1), (0.5,)), y)[0] == 0.5
    assert coverage_error(fc(np.full((10, 1), y.min() - 1), (0.5,)), y)[0] == -0.5
    f, y = ideal_uniform(10000, 0)
    assert np.max(np.abs(coverage_error(f, y))) < 0.02


def test_calibration_examples():
    f, y = ideal_uniform(10000, 1)
    assert calibration_error(f, y) < 0.02
    rng = np.random.default_rng(2)
    y = rng.normal(size=10000)
    const = fc(np.full((10000, 99), np.median(y)))
    assert calibration_error(const, y) == pytest.approx(0.25, abs=0.01)
    one = fc(np.full((1, 99), 5.0))
    assert calibration_error(one, [0.0]) == pytest.approx(np.mean(1 - GRID.array)) == pytest.approx(0.5)


def test_crps_examples():
    assert crps_approx(fc(np.full((3, 99), 4.0)), [4, 4, 4]) == 0
    assert crps_approx(fc(np.full((1, 99), 7.0)), [3.0]) == pytest.approx(4.0, rel=0.02)
    f = fc(np.random.default_rng(3).normal(size=(5, 99)))
    y = np.arange(5.0)
    doubled = fc(2 * f.values)
    assert crps_approx(doubled, 2 * y) == pytest.approx(2 * crps_approx(f, y))
    with pytest.raises(MetricError):
        crps_approx(fc([[1.0, 2.0]], (0.25, 0.75)), [1.0])


def test_ideal_pinball_near_analytic_minimum():
    f, y = ideal_uniform(20000, 4)
    per, _ = pinball(f, y)
    q = GRID.array
    # for U(-1, 1) noise the minimum expected pinball at level q is q(1 - q)
    assert np.all(np.abs(per / (q * (1 - q)) - 1) < 0.05)


def test_point_metrics():
    assert point_metrics([1.0, 2.0], [1.0, 2.0], 0.1) == {"mape": 0.0, "mae": 0.0, "rmse": 0.0}
    m = point_metrics([110.0], [100.0], 1.0)
    assert m["mape"] == pytest.approx(10) and m["mae"] == 10 and m["rmse"] == 10


MILLI = st.integers(-10**6, 10**6).map(lambda v: v / 1000)


@given(arrays(float, 8, elements=MILLI), arrays(float, 8, elements=MILLI))
def test_rmse_at_least_mae(p, y):
    m = point_metrics(p, y, 1.0)
    assert m["rmse"] >= m["mae"] * (1 - 1e-12)


def test_matrix_shape_csv_and_svg(tmp_path):
    f, y = ideal_uniform(500, 5)
    m = metric_matrix(reorder_quantiles(f), y)
    assert m.cells.shape == (99, 4)
    assert set(m.scalars) == {"crps_approx", "mape", "mae", "rmse"}
    assert {"winkler_a02", "winkler_a10", "winkler_a20"} <= set(m.aggregates)
    m.to_csv(tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == ",".join(CSV_HEADER)
    back = MetricMatrix.read_csv(tmp_path / "m.csv")
    assert np.array_equal(back.cells, m.cells) and np.array_equal(back.levels, m.levels)
    n = m.to_svg(tmp_path / "m.svg")
    assert n == 99 * 4 == (tmp_path / "m.svg").read_text().count('class="cell"')
