"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines bypass
output capture so they show up in the normal log.
"""

import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import hourly
from loadbench.bench import PairedResult, improvement_report
from loadbench.features import DayAheadMatrix, build_day_ahead
from loadbench.ingest import SplitSpec, split_train_test
from loadbench.lossfit import (
    AsymmetricLoss,
    CostShape,
    compute_fep,
    curvature_integral,
    fit_cubic_spline,
    fit_loss,
    required_segments,
    segment_error_bound,
    simulate_cost_curve,
)
from loadbench.models import ModelOptions, MSELoss, NetConfig, fit_predict
from loadbench.models.base import QuantileForecast
from loadbench.models.ffnn import fit_predict_ffnn
from loadbench.models.forest import ForestConfig, fit_forest, predict_forest
from loadbench.postmetrics import (
    calibration_error,
    coverage_error,
    monotonicity_violations,
    pinball,
    reorder_quantiles,
    winkler,
)
from loadbench.quantiles import QuantileGrid
from loadbench.synth import SynthSpec, synth_dataset
from oracles import derivative_jumps, forest_oracle_quantiles, simpson_l2

GRID = QuantileGrid()
SEEDS = range(10)


def verdict(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\nACCEPTANCE {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_01_loss_bound(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst, violations = 0.0, 0
    n_curves = 25
    for _ in range(n_curves):
        a2, a3, a4 = rng.uniform(0.5, 3), rng.uniform(-1, 1), rng.uniform(0, 2)
        eps = rng.uniform(-0.5, 0.5, 2000)
        cost = a2 * eps**2 + a3 * eps**3 + a4 * eps**4 + 0.005 * rng.standard_normal(2000)
        tol = rng.uniform(0.002, 0.02)
        fit = fit_loss(eps, cost, tolerance=tol)
        assert fit.K == required_segments(fit.spline, tol)
        bound = segment_error_bound(curvature_integral(fit.spline), fit.K)
        a, b = fit.spline.domain
        for L in (fit.unsmoothed, fit.loss):
            err = simpson_l2(lambda x: fit.spline(x) - L(x), a, b)
            worst = max(worst, err / bound)
            violations += err > bound
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 30
    verdict(capsys, 1, ok, f"{n_curves} curves, {violations} violations, worst err/bound {worst:.3f}, {elapsed:.1f}s")


def test_02_k_worked_example(capsys):
    eps = np.linspace(-1, 1, 401)
    s = fit_cubic_spline(eps, eps**2, n_knots=5)
    closed = (2 * 2**0.4) ** 2.5  # s'' = 2 on an interval of length 2
    A = curvature_integral(s)
    K = required_segments(s, 0.1)
    ok = K == 4 and abs(A - closed) < 1e-6
    verdict(capsys, 2, ok, f"K={K}, A={A:.9f}, closed form {closed:.9f}")


def test_03_c1_smoothing_and_adapter_gradient(capsys):
    rng = np.random.default_rng(7)
    worst_v = worst_d = 0.0
    for _ in range(100):
        eps = rng.uniform(-0.5, 0.5, 600)
        cost = rng.uniform(0.5, 3) * eps**2 + rng.uniform(-1, 1) * eps**3 + 0.01 * rng.standard_normal(600)
        L = fit_loss(eps, cost, tolerance=rng.uniform(0.002, 0.02)).loss
        dv, dd = derivative_jumps(L)
        worst_v, worst_d = max(worst_v, dv), max(worst_d, dd)

    s = simulate_cost_curve(CostShape(), noise=0.01, seed=11)
    loss = AsymmetricLoss(fit_loss(s.epsilon, s.cost).loss, floor=1.0)
    y = rng.uniform(50, 150, 1000)
    f = y * (1 + rng.uniform(-0.6, 0.6, 1000))
    _, g = loss(f, y)
    h = 1e-5
    num = (loss(f + h, y)[0] - loss(f - h, y)[0]) / (2 * h)
    rel = float(np.max(np.abs(num - g) / np.maximum(np.abs(g), 1e-6)))
    ok = worst_v < 1e-10 and worst_d < 1e-10 and rel < 1e-5
    verdict(capsys, 3, ok, f"jumps value {worst_v:.2e} slope {worst_d:.2e}; adapter FD rel err {rel:.2e}")


@pytest.mark.parametrize("split_rule", ["best", "random"])
def test_04_forest_oracle(capsys, split_rule):
    mismatched = 0
    cases = 0
    for seed in range(6):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(20, 201))
        X = rng.normal(size=(n, 3))
        y = np.round(2 * X[:, 0] + rng.normal(size=n), 1)  # rounding creates ties
        X_test = rng.normal(size=(15, 3))
        for leaf_mode in ("all", "sample"):
            cfg = ForestConfig(n_trees=int(rng.integers(1, 6)), min_leaf=int(rng.integers(1, 8)),
                               split_rule=split_rule, leaf_mode=leaf_mode, seed=seed)
            model = fit_forest((X, y), cfg)
            got = predict_forest(model, X_test, GRID)
            want = forest_oracle_quantiles(model, X, X_test, GRID.levels)
            mismatched += int(np.sum(got != want))
            cases += 1
    name = "QRF" if split_rule == "best" else "QERT"
    verdict(capsys, 4, mismatched == 0, f"{name}: {cases} forests x 15 rows x 99 levels, {mismatched} mismatches")


def uniform_problem(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 10, n)
    y = x + rng.uniform(-1, 1, n)
    e = np.zeros((n, 0))
    return DayAheadMatrix(hourly(n), np.repeat(x[:, None], 7, axis=1), e, e, e, y, "lags")


def test_05_ffnn_quantile_recovery(capsys):
    t0 = time.perf_counter()
    train, test = uniform_problem(20000, 0), uniform_problem(20000, 1)
    f = fit_predict_ffnn(train, test, GRID, NetConfig(seed=0))
    per, _ = pinball(f, test.target)
    q = GRID.array
    # the minimum expected pinball for U(-1, 1) noise is q(1 - q)
    ratio = per / (q * (1 - q))
    cov = coverage_error(f, test.target)
    cov3 = [float(cov[GRID.index_of(level)]) for level in (0.1, 0.5, 0.9)]
    elapsed = time.perf_counter() - t0
    ok = np.all(np.abs(ratio - 1) <= 0.10) and max(map(abs, cov3)) < 0.03 and elapsed < 300
    verdict(capsys, 5, ok, f"pinball/optimum in [{ratio.min():.3f}, {ratio.max():.3f}], "
                           f"coverage error at 0.1/0.5/0.9 {np.round(cov3, 4).tolist()}, {elapsed:.0f}s")


def synthetic_matrices(seed, spec=SynthSpec()):
    table = synth_dataset(spec, seed)
    train, test = split_train_test(table, SplitSpec(0.25))
    out = {}
    for coupled in (False, True):
        out[coupled] = build_day_ahead(table, coupled).split_at(test.timestamps[0])
    return out


def test_06_feature_coupling_direction(capsys):
    ffnn_wins = qce_wins = 0
    rows = []
    for seed in SEEDS:
        mats = synthetic_matrices(seed)
        opts = ModelOptions(net=NetConfig(seed=seed))
        scores = {}
        for name in ("FFNN", "FFNN_T", "QCE", "QCE_T"):
            train, test = mats[name.endswith("_T")]
            scores[name] = pinball(reorder_quantiles(fit_predict(name, train, test, GRID, opts)), test.target)[1]
        ffnn_wins += scores["FFNN_T"] < scores["FFNN"]
        qce_wins += scores["QCE_T"] < scores["QCE"]
        rows.append({k: round(v, 2) for k, v in scores.items()})
    ok = ffnn_wins >= 8 and qce_wins >= 8
    verdict(capsys, 6, ok, f"FFNN_T<FFNN {ffnn_wins}/10, QCE_T<QCE {qce_wins}/10; per seed {rows}")


def test_07_asymmetric_loss_direction(capsys):
    shape = CostShape()
    samples = simulate_cost_curve(shape, n=2000, noise=0.01, seed=0)
    fit = fit_loss(samples.epsilon, samples.cost, 0.01)
    wins = 0
    costs = []
    for seed in SEEDS:
        train, test = synthetic_matrices(seed, SynthSpec(noise=0.15))[True]
        floor = 0.01 * float(np.mean(np.abs(train.target)))
        opts = ModelOptions(net=NetConfig(output_mode="point", seed=seed))
        pm = fit_predict("FFNN_T", train, test, GRID, opts, loss=MSELoss())
        pa = fit_predict("FFNN_T", train, test, GRID, opts, loss=AsymmetricLoss(fit.loss, floor))
        cm = float(shape.true_cost(compute_fep(pm, test.target, floor)).mean())
        ca = float(shape.true_cost(compute_fep(pa, test.target, floor)).mean())
        wins += ca < cm
        costs.append((round(cm, 5), round(ca, 5)))
    verdict(capsys, 7, wins >= 8, f"asymmetric < MSE realized cost {wins}/10 (K={fit.K}); (mse, asym) {costs}")


def fc(values, levels):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    return QuantileForecast(hourly(len(values)), values, QuantileGrid(tuple(levels)))


def test_08_metric_examples_and_reordering(capsys):
    checks = {
        "pinball perfect": pinball(fc([[10, 10]], (0.1, 0.9)), [10])[1] == 0,
        "pinball under": np.isclose(pinball(fc([[0, 8]], (0.1, 0.9)), [10])[0][1], 1.8, rtol=0, atol=1e-12),
        "pinball over": np.isclose(pinball(fc([[0, 12]], (0.1, 0.9)), [10])[0][1], 0.2, rtol=0, atol=1e-12),
        "winkler inside": winkler(fc([[10, 15, 20]], (0.05, 0.5, 0.95)), [15], 0.1) == 10,
        "winkler upper": np.isclose(winkler(fc([[10, 15, 20]], (0.05, 0.5, 0.95)), [25], 0.1), 110, rtol=0, atol=1e-9),
        "winkler lower": np.isclose(winkler(fc([[10, 15, 20]], (0.05, 0.5, 0.95)), [9], 0.1), 30, rtol=0, atol=1e-9),
        "coverage all": coverage_error(fc(np.full((10, 1), 10.0), (0.5,)), np.arange(10.0))[0] == 0.5,
        "coverage none": coverage_error(fc(np.full((10, 1), -1.0), (0.5,)), np.arange(10.0))[0] == -0.5,
        "calibration single": np.isclose(calibration_error(fc(np.full((1, 99), 5.0), GRID.levels), [0.0]), 0.5,
                                         rtol=0, atol=1e-12),
    }
    rng = np.random.default_rng(8)
    x = rng.uniform(0, 10, 10000)
    y = x + rng.uniform(-1, 1, 10000)
    ideal = fc(x[:, None] + (2 * GRID.array - 1)[None, :], GRID.levels)
    checks["coverage ideal"] = np.max(np.abs(coverage_error(ideal, y))) < 0.02
    checks["calibration ideal"] = calibration_error(ideal, y) < 0.02
    messy = fc(rng.normal(size=(10000, 99)), GRID.levels)
    before = monotonicity_violations(messy)
    after = monotonicity_violations(reorder_quantiles(messy))
    failed = [k for k, v in checks.items() if not v]
    ok = not failed and after == 0 and before > 0
    verdict(capsys, 8, ok, f"{len(checks) - len(failed)}/{len(checks)} examples; violations {before} -> {after}")


def test_09_cli_determinism(capsys, tmp_path):
    cfg = {
        "datasets": [{"name": "syn", "synth": {"n_hours": 24 * 200, "noise": 0.05}, "seed": 3}],
        "models": ["BEQ", "BMQ", "BCEP", "QCE", "QCE_T", "QKNNR_T", "QRFR", "QSERT_T", "FFNN", "FFNN_T"],
        "model_options": {"forest": {"n_trees": 8}, "net": {"epochs": 3, "hidden_width": 16}},
        "loss_modes": {"FFNN_T": ["pinball_grid", "mse", {"kind": "asymmetric", "simulate": {"seed": 0}}]},
    }
    runs = []
    for i, threads in enumerate((1, 1, 8, 8)):
        path = tmp_path / f"cfg{i}.json"
        path.write_text(json.dumps({**cfg, "output_dir": str(tmp_path / f"run{i}")}))
        env = {**os.environ, "LOADBENCH_THREADS": str(threads)}
        proc = subprocess.run([sys.executable, "-m", "loadbench.cli", "run", "--config", str(path)],
                              env=env, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        runs.append({p.name: p.read_bytes() for p in sorted((tmp_path / f"run{i}").glob("*.metrics.csv"))})
    ok = len(runs[0]) == 12 and all(r == runs[0] for r in runs[1:])
    verdict(capsys, 9, ok, f"{len(runs[0])} metric CSVs identical across 2 runs at 1 thread and 2 at 8 threads")


def test_10_report_arithmetic(capsys):
    # GEF14 and Covid19 rows of the published pinball table
    pairs = [
        PairedResult("GEF14", "FFNN", 36.17, 25.97),
        PairedResult("Covid19", "FFNN", 8970.64, 22225.40),
        PairedResult("GEF14", "QCE", 46.61, 27.71),
        PairedResult("GEF14", "QKNNR", 44.70, 44.23),
        PairedResult("GEF14", "QRFR", 34.18, 34.77),
        PairedResult("GEF14", "QSRFR", 34.22, 34.83),
        PairedResult("GEF14", "QERT", 34.08, 31.81),
        PairedResult("GEF14", "QSERT", 34.07, 31.85),
    ]
    rep = improvement_report(pairs, "pinball", "feature_T")
    gef14_ffnn = next(d for d in rep.deltas if d["dataset"] == "GEF14" and d["model"] == "FFNN")
    want = {"non_deep": {"NP": 4 / 6, "NNP": 2 / 6}, "deep": {"DP": 0.5, "DNP": 0.5}}
    asym = improvement_report(
        [PairedResult("GEF14", "FFNN_T", 5.0, 4.0), PairedResult("GEF12_1", "FFNN_T", 3.0, 3.0),
         PairedResult("PDB", "FFNN_T", 2.0, 1.5), PairedResult("Spanish", "FFNN_T", 7.0, 7.5)],
        "mape", "loss_asym",
    )
    ok = (
        gef14_ffnn["improved"]
        and np.isclose(gef14_ffnn["delta"], 25.97 - 36.17)
        and rep.proportions.keys() == want.keys()
        and all(np.isclose(rep.proportions[c][k], v) for c in want for k, v in want[c].items())
        and rep.by_dataset["Covid19"] == {"P": 0.0, "NP": 1.0}
        and asym.proportions == {"all": {"P": 0.5, "NP": 0.5}}
    )
    verdict(capsys, 10, ok, f"GEF14 FFNN improved={gef14_ffnn['improved']}; feature_T {rep.proportions}; "
                            f"loss_asym {asym.proportions}")
