"""Quantile regression forests with best-split (CART) or extremely randomized splits.

Trees are grown on bootstrap resamples.  After growing, every original
training row is dropped down the tree and the leaves keep those rows'
targets, so the predictive distribution is the Meinshausen weighted
empirical CDF.  ``leaf_mode="sample"`` keeps one uniformly drawn member per
leaf instead.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..features import DayAheadMatrix
from ..quantiles import QuantileGrid, exact_level
from .base import ModelError, QuantileForecast


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 5
    split_rule: str = "best"
    leaf_mode: str = "all"
    seed: int = 0
    bootstrap: bool = True
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_trees < 1 or self.min_leaf < 1:
            raise ValueError("n_trees and min_leaf must be >= 1")
        if self.split_rule not in ("best", "random"):
            raise ValueError(f"unknown split_rule {self.split_rule!r}")
        if self.leaf_mode not in ("all", "sample"):
            raise ValueError(f"unknown leaf_mode {self.leaf_mode!r}")


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray  # -1 marks a leaf
    right: np.ndarray
    leaf_members: dict = field(default_factory=dict)  # node -> training row indices

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.left[node] >= 0)
        while len(active):
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.left[node[active]] >= 0]
        return node


def _best_split(x: np.ndarray, y: np.ndarray, min_leaf: int):
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = len(ys)
    csum = np.cumsum(ys)[:-1]
    n_left = np.arange(1, n)
    total = csum[-1] + ys[-1]
    score = csum**2 / n_left + (total - csum) ** 2 / (n - n_left)
    valid = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf)
    i = int(np.argmax(score))
    thr = xs[i] + (xs[i + 1] - xs[i]) / 2
    if thr >= xs[i + 1]:
        thr = xs[i]
    return score[i], thr


def _random_split(x: np.ndarray, y: np.ndarray, min_leaf: int, rng):
    lo, hi = x.min(), x.max()
    if lo == hi:
        return None
    thr = rng.uniform(lo, hi)
    mask = x <= thr
    nl = int(mask.sum())
    nr = len(x) - nl
    if nl < min_leaf or nr < min_leaf:
        return None
    sl = y[mask].sum()
    sr = y.sum() - sl
    return sl**2 / nl + sr**2 / nr, thr


def grow_tree(X: np.ndarray, y: np.ndarray, config: ForestConfig, rng) -> Tree:
    """Grow one regression tree on (X, y) by variance reduction."""
    n, p = X.shape
    mtry = max(1, math.ceil(math.sqrt(p)))
    feature, threshold, left, right = [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        return len(feature) - 1

    stack = [(new_node(), np.arange(n), 0)]
    while stack:
        node, rows, depth = stack.pop()
        yr = y[rows]
        if (
            len(rows) < 2 * config.min_leaf
            or (config.max_depth is not None and depth >= config.max_depth)
            or np.all(yr == yr[0])
        ):
            continue
        best = None
        for j in rng.choice(p, size=mtry, replace=False):
            xj = X[rows, j]
            if config.split_rule == "best":
                cand = _best_split(xj, yr, config.min_leaf)
            else:
                cand = _random_split(xj, yr, config.min_leaf, rng)
            if cand is not None and (best is None or cand[0] > best[0]):
                best = (cand[0], int(j), cand[1])
        if best is None:
            continue
        _, j, thr = best
        mask = X[rows, j] <= thr
        feature[node], threshold[node] = j, thr
        lnode, rnode = new_node(), new_node()
        left[node], right[node] = lnode, rnode
        stack.append((rnode, rows[~mask], depth + 1))
        stack.append((lnode, rows[mask], depth + 1))

    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=float),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
    )


@dataclass
class QuantileForestModel:
    config: ForestConfig
    trees: list
    train_target: np.ndarray

    def leaf_weights(self, X: np.ndarray) -> np.ndarray:
        """(rows, n_train) forest weights; each row sums to one."""
        T = len(self.trees)
        W = np.zeros((len(X), len(self.train_target)))
        for tree in self.trees:
            leaves = tree.apply(X)
            for leaf in np.unique(leaves):
                members = tree.leaf_members[int(leaf)]
                rows = np.flatnonzero(leaves == leaf)
                W[np.ix_(rows, members)] += 1.0 / (T * len(members))
        return W

    def exact_leaf_weights(self, x: np.ndarray) -> dict:
        """Nonzero forest weights of one row as exact fractions, keyed by training row."""
        T = len(self.trees)
        w: dict = {}
        for tree in self.trees:
            members = tree.leaf_members[int(tree.apply(x[None, :])[0])]
            for i in members:
                w[int(i)] = w.get(int(i), Fraction(0)) + Fraction(1, T * len(members))
        return w


def _fit_one(X, y, config: ForestConfig, t: int) -> Tree:
    rng = np.random.default_rng([config.seed, t])
    n = len(y)
    boot = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
    tree = grow_tree(X[boot], y[boot], config, rng)
    leaves = tree.apply(X)
    # separate stream so leaf sampling never perturbs the tree structure
    leaf_rng = np.random.default_rng([config.seed, t, 1])
    for leaf in np.unique(leaves):
        members = np.flatnonzero(leaves == leaf)
        if config.leaf_mode == "sample":
            members = members[[leaf_rng.integers(len(members))]]
        tree.leaf_members[int(leaf)] = members
    return tree


def fit_forest(train: DayAheadMatrix | tuple, config: ForestConfig = ForestConfig()) -> QuantileForestModel:
    """Fit a quantile forest on a matrix, or on an ``(X, y)`` pair."""
    X, y = (train.X, train.target) if isinstance(train, DayAheadMatrix) else train
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        raise ModelError("empty training matrix")
    if config.n_jobs > 1:
        with ThreadPoolExecutor(config.n_jobs) as ex:
            trees = list(ex.map(lambda t: _fit_one(X, y, config, t), range(config.n_trees)))
    else:
        trees = [_fit_one(X, y, config, t) for t in range(config.n_trees)]
    return QuantileForestModel(config, trees, y)


def predict_forest(
    model: QuantileForestModel, test: DayAheadMatrix | np.ndarray, grid: QuantileGrid, chunk: int = 256
) -> np.ndarray | QuantileForecast:
    """Weighted-CDF quantiles ``inf{y : F(y) >= q}`` for each test row.

    Returns a :class:`QuantileForecast` for a matrix input and a bare array
    for a raw feature array.
    """
    X = test.X if isinstance(test, DayAheadMatrix) else np.asarray(test, dtype=float)
    y = model.train_target
    order = np.argsort(y, kind="stable")
    ys = y[order]
    uniq, start = np.unique(ys, return_index=True)
    last = np.r_[start[1:] - 1, len(ys) - 1]
    qs = grid.array
    out = np.empty((len(X), len(qs)))
    for s in range(0, len(X), chunk):
        W = model.leaf_weights(X[s : s + chunk])
        cum = np.cumsum(W[:, order], axis=1)[:, last]
        for r in range(len(W)):
            c = cum[r]
            idx = np.searchsorted(c, qs, side="left")
            near = np.abs(c[np.minimum(idx, len(c) - 1)] - qs) < 1e-9
            near |= np.abs(c[np.maximum(idx - 1, 0)] - qs) < 1e-9
            row = uniq[np.minimum(idx, len(uniq) - 1)]
            if near.any():
                # float cumsum can straddle q; settle those levels exactly
                row[near] = _exact_quantiles(model.exact_leaf_weights(X[s + r]), y, qs[near])
            out[s + r] = row
    if isinstance(test, DayAheadMatrix):
        return QuantileForecast(test.timestamps, out, grid)
    return out


def _exact_quantiles(weights: dict, y: np.ndarray, levels) -> np.ndarray:
    support = sorted(set(float(y[i]) for i in weights))
    mass = dict.fromkeys(support, Fraction(0))
    for i, w in weights.items():
        mass[float(y[i])] += w
    cum, acc = [], Fraction(0)
    for v in support:
        acc += mass[v]
        cum.append(acc)
    return np.array([support[next(k for k, c in enumerate(cum) if c >= exact_level(q))] for q in levels])
