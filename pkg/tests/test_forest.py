import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loadbench.models.forest import ForestConfig, fit_forest, predict_forest
from loadbench.quantiles import QuantileGrid
from oracles import forest_oracle_quantiles

GRID = QuantileGrid()


def data(seed, n=60, p=4):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = np.round(X[:, 0] * 3 + rng.normal(size=n), 1)
    return X, y


def test_stump_is_empirical_distribution():
    X, y = data(0)
    m = fit_forest((X, y), ForestConfig(n_trees=1, min_leaf=len(y), bootstrap=False))
    got = predict_forest(m, X[:3], GRID)
    want = np.sort(y)[[int(np.ceil(round(q * len(y), 9))) - 1 for q in GRID.levels]]
    np.testing.assert_array_equal(got, np.tile(want, (3, 1)))


def test_pure_leaves_return_own_target():
    X = np.arange(10.0)[:, None]
    y = np.arange(10.0) * 2
    m = fit_forest((X, y), ForestConfig(n_trees=1, min_leaf=1, bootstrap=False))
    got = predict_forest(m, X, GRID)
    np.testing.assert_array_equal(got, np.repeat(y[:, None], 99, axis=1))


def test_leaf_example_four_members():
    X = np.array([[0.0], [0.1], [0.2], [0.3], [5.0], [5.1], [5.2], [5.3]])
    y = np.array([1.0, 2, 3, 4, 10, 20, 30, 40])
    m = fit_forest((X, y), ForestConfig(n_trees=1, min_leaf=4, bootstrap=False))
    got = predict_forest(m, np.array([[0.05]]), QuantileGrid((0.25, 0.5)))
    np.testing.assert_array_equal(got[0], [1, 2])


def test_seeded_refit_identical_and_seed_matters():
    X, y = data(1)
    cfg = ForestConfig(n_trees=5, min_leaf=3, seed=7)
    a, b = fit_forest((X, y), cfg), fit_forest((X, y), cfg)
    for ta, tb in zip(a.trees, b.trees):
        assert np.array_equal(ta.feature, tb.feature) and np.array_equal(ta.threshold, tb.threshold)
    c = fit_forest((X, y), ForestConfig(n_trees=5, min_leaf=3, seed=8))
    assert any(not np.array_equal(ta.threshold, tc.threshold) for ta, tc in zip(a.trees, c.trees))


def test_thread_count_does_not_change_forecast():
    X, y = data(2, n=150)
    a = predict_forest(fit_forest((X, y), ForestConfig(n_trees=8, seed=3)), X[:20], GRID)
    b = predict_forest(fit_forest((X, y), ForestConfig(n_trees=8, seed=3, n_jobs=4)), X[:20], GRID)
    assert np.array_equal(a, b)


def test_duplicated_trees_match_single_tree():
    X, y = data(3)
    m = fit_forest((X, y), ForestConfig(n_trees=1, min_leaf=4, seed=0))
    one = predict_forest(m, X[:10], GRID)
    m.trees = m.trees * 2
    np.testing.assert_array_equal(predict_forest(m, X[:10], GRID), one)


def test_sample_mode_with_singleton_leaves_equals_all():
    rng = np.random.default_rng(4)
    X, y = rng.normal(size=(50, 3)), rng.normal(size=50)
    kw = dict(n_trees=4, min_leaf=1, seed=2, bootstrap=False)
    a = fit_forest((X, y), ForestConfig(leaf_mode="all", **kw))
    b = fit_forest((X, y), ForestConfig(leaf_mode="sample", **kw))
    assert all(len(v) == 1 for t in a.trees for v in t.leaf_members.values())
    Xt = rng.normal(size=(20, 3))
    np.testing.assert_array_equal(predict_forest(a, Xt, GRID), predict_forest(b, Xt, GRID))


def test_weights_sum_to_one():
    X, y = data(5)
    m = fit_forest((X, y), ForestConfig(n_trees=6, min_leaf=3))
    np.testing.assert_allclose(m.leaf_weights(X[:10]).sum(axis=1), 1.0)
    assert sum(m.exact_leaf_weights(X[0]).values()) == 1


def test_monotone_in_level():
    X, y = data(6, n=200)
    f = predict_forest(fit_forest((X, y), ForestConfig(n_trees=10, split_rule="random")), X[:30], GRID)
    assert np.all(np.diff(f, axis=1) >= 0)


def test_config_validation():
    with pytest.raises(ValueError):
        ForestConfig(split_rule="median")
    with pytest.raises(ValueError):
        ForestConfig(n_trees=0)


@settings(max_examples=12, deadline=None)
@given(
    st.integers(0, 10**6),
    st.sampled_from(["best", "random"]),
    st.sampled_from(["all", "sample"]),
    st.integers(1, 4),
)
def test_matches_brute_force_oracle(seed, rule, leaf_mode, n_trees):
    X, y = data(seed, n=40, p=3)
    m = fit_forest((X, y), ForestConfig(n_trees=n_trees, min_leaf=2, split_rule=rule, leaf_mode=leaf_mode, seed=seed))
    rng = np.random.default_rng(seed + 1)
    Xt = np.vstack([X[:3], rng.normal(size=(3, 3))])
    np.testing.assert_array_equal(predict_forest(m, Xt, GRID), forest_oracle_quantiles(m, X, Xt, GRID.levels))
