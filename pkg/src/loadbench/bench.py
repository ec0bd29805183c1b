"""Config-driven benchmark runs and improvement-proportion reports."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .features import build_day_ahead
from .impute import ImputePolicy, impute_table
from .ingest import SeriesTable, SplitSpec, concat, mask_zero_load, parse_csv, split_train_test
from .lossfit import AsymmetricLoss, CostShape, PiecewiseLinearLoss, compute_fep, fit_loss, simulate_cost_curve
from .models import (
    MODEL_NAMES,
    ForestConfig,
    ModelOptions,
    MSELoss,
    NetConfig,
    base_name,
    fit_predict,
    is_deep,
    uses_coupling,
)
from .postmetrics import metric_matrix, point_metrics, reorder_quantiles
from .quantiles import QuantileGrid
from .synth import SynthSpec, synth_dataset

logger = logging.getLogger(__name__)

LOSS_TAGS = {"mse": "mse", "asymmetric": "asym"}
CONFIG_KEYS = {
    "datasets", "models", "output_dir", "features", "impute", "split", "ingest",
    "loss_modes", "model_options", "grid", "alphas", "seed",
}  # fmt: skip


class ConfigError(ValueError):
    pass


def _build(cls, data: dict | None, what: str):
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid {what}: {e}") from e


@dataclass(frozen=True)
class DatasetConfig:
    name: str
    path: str | None = None
    schema: dict = field(default_factory=dict)
    synth: dict | None = None
    seed: int = 0
    test_fraction: float | None = None


@dataclass(frozen=True)
class FeatureConfig:
    use_coupling: bool | None = None  # None: follow the model's _T suffix
    use_raw_calendar: bool = True
    temperature_column: str | None = "airTemperature"


@dataclass(frozen=True)
class LossMode:
    kind: str  # pinball_grid | mse | asymmetric
    loss_path: str | None = None
    simulate: dict | None = None
    tolerance: float = 0.01

    @property
    def tag(self) -> str | None:
        return LOSS_TAGS.get(self.kind)

    @classmethod
    def parse(cls, raw) -> "LossMode":
        if isinstance(raw, str):
            raw = {"kind": raw}
        if "asymmetric" in raw and "kind" not in raw:
            raw = {"kind": "asymmetric", **(raw["asymmetric"] or {})}
        mode = _build(cls, raw, "loss mode")
        if mode.kind not in ("pinball_grid", "mse", "asymmetric"):
            raise ConfigError(f"unknown loss mode {mode.kind!r}")
        if mode.kind == "asymmetric" and not (mode.loss_path or mode.simulate is not None):
            raise ConfigError("asymmetric loss needs loss_path or simulate")
        return mode


@dataclass
class RunConfig:
    datasets: list
    models: list
    output_dir: str
    features: FeatureConfig = field(default_factory=FeatureConfig)
    impute: ImputePolicy = field(default_factory=ImputePolicy)
    split: SplitSpec = field(default_factory=SplitSpec)
    zero_as_missing: bool = True
    loss_modes: dict = field(default_factory=dict)  # model -> [LossMode]
    options: ModelOptions = field(default_factory=ModelOptions)
    grid: QuantileGrid = field(default_factory=QuantileGrid)
    alphas: tuple = (0.02, 0.10, 0.20)
    seed: int = 0
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "RunConfig":
        base_dir = base_dir or Path.cwd()
        unknown = set(d) - CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            datasets = [_build(DatasetConfig, ds, "dataset") for ds in d["datasets"]]
            models = list(d["models"])
            output_dir = d["output_dir"]
        except KeyError as e:
            raise ConfigError(f"missing config key {e}") from None
        if not datasets or not models:
            raise ConfigError("need at least one dataset and one model")
        for m in models:
            if m not in MODEL_NAMES:
                raise ConfigError(f"unknown model {m!r}")
        names = [ds.name for ds in datasets]
        if len(set(names)) != len(names):
            raise ConfigError("dataset names must be unique")
        datasets = [
            ds if ds.path is None or Path(ds.path).is_absolute() else _replace_path(ds, base_dir)
            for ds in datasets
        ]
        for ds in datasets:
            if (ds.path is None) == (ds.synth is None):
                raise ConfigError(f"dataset {ds.name!r} needs exactly one of path or synth")

        opts = d.get("model_options", {})
        for section, allowed in (("model_options", {"forest", "net", "knn_k", "window_days"}),
                                 ("ingest", {"zero_as_missing"})):
            extra = set(d.get(section, {})) - allowed
            if extra:
                raise ConfigError(f"unknown {section} keys: {', '.join(sorted(extra))}")
        seed = int(d.get("seed", 0))
        forest = _build(ForestConfig, {"seed": seed, **opts.get("forest", {})}, "forest options")
        net = _build(NetConfig, {"seed": seed, **opts.get("net", {})}, "net options")
        options = ModelOptions(
            forest, net, int(opts.get("knn_k", 20)), int(opts.get("window_days", 30))
        )
        loss_modes = {}
        for model, modes in d.get("loss_modes", {}).items():
            if model not in models:
                raise ConfigError(f"loss modes given for model {model!r} not in the model list")
            parsed = [LossMode.parse(m) for m in modes]
            kinds = [m.kind for m in parsed]
            if len(set(kinds)) != len(kinds):
                raise ConfigError(f"duplicate loss modes for {model!r}; task labels would collide")
            if base_name(model) != "FFNN" and any(m.kind != "pinball_grid" for m in parsed):
                raise ConfigError(f"point-loss modes apply to FFNN models only, not {model!r}")
            for m in parsed:
                if m.loss_path and not Path(m.loss_path).is_absolute():
                    object.__setattr__(m, "loss_path", str(base_dir / m.loss_path))
            loss_modes[model] = parsed
        out = Path(output_dir)
        if not out.is_absolute():
            out = base_dir / out
        grid = QuantileGrid(tuple(d["grid"])) if "grid" in d else QuantileGrid()
        return cls(
            datasets=datasets,
            models=models,
            output_dir=str(out),
            features=_build(FeatureConfig, d.get("features"), "features"),
            impute=_build(ImputePolicy, d.get("impute"), "impute"),
            split=_build(SplitSpec, d.get("split"), "split"),
            zero_as_missing=bool(d.get("ingest", {}).get("zero_as_missing", True)),
            loss_modes=loss_modes,
            options=options,
            grid=grid,
            alphas=tuple(d.get("alphas", (0.02, 0.10, 0.20))),
            seed=seed,
            raw=d,
        )

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        return cls.from_dict(d, path.parent)

    def modes_for(self, model: str) -> list:
        return self.loss_modes.get(model, [LossMode("pinball_grid")])


def _replace_path(ds: DatasetConfig, base_dir: Path) -> DatasetConfig:
    return DatasetConfig(ds.name, str(base_dir / ds.path), ds.schema, ds.synth, ds.seed, ds.test_fraction)


@dataclass
class PreparedDataset:
    name: str
    train_table: SeriesTable
    test_table: SeriesTable
    matrices: dict  # mode -> (train, test)
    floor: float


def prepare_dataset(ds: DatasetConfig, cfg: RunConfig) -> PreparedDataset:
    """Ingest, impute train and test separately, then build both feature modes."""
    if ds.synth is not None:
        table = synth_dataset(_build(SynthSpec, ds.synth, "synth spec"), ds.seed)
    else:
        table = parse_csv(ds.path, ds.schema)
    if cfg.zero_as_missing:
        table = mask_zero_load(table)
    split = SplitSpec(ds.test_fraction) if ds.test_fraction is not None else cfg.split
    train, test = split_train_test(table, split)
    train, test = impute_table(train, cfg.impute), impute_table(test, cfg.impute)
    full = concat([train, test])
    boundary = test.timestamps[0]
    fc = cfg.features
    matrices = {}
    for coupled in (False, True):
        m = build_day_ahead(full, coupled, fc.use_raw_calendar, fc.temperature_column)
        matrices[coupled] = m.split_at(boundary)
    floor = 0.01 * float(np.mean(np.abs(train.load)))
    return PreparedDataset(ds.name, train, test, matrices, floor)


@dataclass(frozen=True)
class Task:
    dataset: str
    model: str
    mode: LossMode

    @property
    def label(self) -> str:
        return self.model if self.mode.tag is None else f"{self.model}-{self.mode.tag}"

    @property
    def stem(self) -> str:
        return f"{self.dataset}__{self.label}"


def _write_forecast(path: Path, timestamps, actual, values, columns) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "actual", *columns])
        for ts, y, row in zip(timestamps.astype("datetime64[s]"), actual, values):
            w.writerow([str(ts), repr(float(y)), *(repr(float(v)) for v in row)])


def _resolve_asymmetric(mode: LossMode):
    """Fitted loss plus the generating cost shape when the samples are simulated."""
    if mode.loss_path:
        return PiecewiseLinearLoss.load(mode.loss_path), None
    sim = dict(mode.simulate or {})
    shape = CostShape(
        tuple(sim.pop("coeffs", CostShape.coeffs)), tuple(sim.pop("interval", CostShape.interval))
    )
    samples = simulate_cost_curve(shape, int(sim.pop("n", 2000)), float(sim.pop("noise", 0.01)), int(sim.pop("seed", 0)))
    if sim:
        raise ConfigError(f"unknown simulate keys {sorted(sim)}")
    return fit_loss(samples.epsilon, samples.cost, mode.tolerance).loss, shape


def run_task(task: Task, data: PreparedDataset, cfg: RunConfig, out: Path) -> list[str]:
    """Fit, forecast, score and persist one (dataset, model, loss mode) task."""
    use_coupling = cfg.features.use_coupling if cfg.features.use_coupling is not None else uses_coupling(task.model)
    train, test = data.matrices[use_coupling]
    t0 = time.perf_counter()
    meta = {
        "dataset": task.dataset,
        "model": task.model,
        "label": task.label,
        "loss_mode": asdict(task.mode),
        "feature_mode": train.mode,
        "n_train": len(train),
        "n_test": len(test),
        "options": asdict(cfg.options),
        "impute": asdict(cfg.impute),
        "fep_floor": data.floor,
        "deep": is_deep(task.model),
    }
    artifacts = []
    stem = out / task.stem
    if task.mode.kind == "pinball_grid":
        fc = reorder_quantiles(fit_predict(task.model, train, test, cfg.grid, cfg.options))
        fit_s = time.perf_counter() - t0
        mm = metric_matrix(fc, test.target, cfg.alphas, data.floor)
        _write_forecast(Path(f"{stem}.forecast.csv"), fc.timestamps, test.target, fc.values,
                        [f"q{q:g}" for q in cfg.grid.levels])
        mm.to_csv(f"{stem}.metrics.csv")
        mm.to_svg(f"{stem}.svg", title=task.stem)
        metrics = {**mm.aggregates, **mm.scalars}
        artifacts += [f"{task.stem}.forecast.csv", f"{task.stem}.metrics.csv", f"{task.stem}.svg"]
    else:
        net = NetConfig(**{**asdict(cfg.options.net), "output_mode": "point"})
        options = ModelOptions(cfg.options.forest, net, cfg.options.knn_k, cfg.options.window_days)
        shape = None
        if task.mode.kind == "mse":
            loss = MSELoss()
            # the MSE twin is scored on the asymmetric twin's cost shape when one exists
            for m in cfg.modes_for(task.model):
                if m.kind == "asymmetric" and m.simulate is not None:
                    shape = _resolve_asymmetric(m)[1]
        else:
            fitted, shape = _resolve_asymmetric(task.mode)
            loss = AsymmetricLoss(fitted, data.floor)
        pred = fit_predict(task.model, train, test, cfg.grid, options, loss)
        fit_s = time.perf_counter() - t0
        metrics = point_metrics(pred, test.target, data.floor)
        if shape is not None:
            metrics["true_cost"] = float(np.mean(shape.true_cost(compute_fep(pred, test.target, data.floor))))
        _write_forecast(Path(f"{stem}.forecast.csv"), test.timestamps, test.target, pred[:, None], ["forecast"])
        with open(f"{stem}.metrics.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write("metric,value\n")
            for k in sorted(metrics):
                fh.write(f"{k},{float(metrics[k])!r}\n")
        artifacts += [f"{task.stem}.forecast.csv", f"{task.stem}.metrics.csv"]
    meta["metrics"] = metrics
    meta["timings"] = {"fit_predict_s": fit_s, "total_s": time.perf_counter() - t0}
    with open(f"{stem}.meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
    artifacts.append(f"{task.stem}.meta.json")
    return artifacts


def thread_cap(default: int | None = None) -> int:
    env = os.environ.get("LOADBENCH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"LOADBENCH_THREADS must be an integer, got {env!r}") from None
    return default or os.cpu_count() or 1


def run_benchmark(cfg: RunConfig, threads: int | None = None) -> dict:
    """Run every task, isolate failures, and write ``manifest.json``.

    Returns the manifest; ``manifest["failed"]`` counts failed tasks.
    """
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"output directory not writable: {e}") from e
    threads = threads or thread_cap()
    tasks = [Task(ds.name, m, mode) for ds in cfg.datasets for m in cfg.models for mode in cfg.modes_for(m)]

    prepared, prep_errors = {}, {}
    for ds in cfg.datasets:
        try:
            prepared[ds.name] = prepare_dataset(ds, cfg)
        except Exception as e:  # noqa: BLE001 - isolate per dataset
            logger.error("dataset %s failed: %s", ds.name, e)
            prep_errors[ds.name] = f"{type(e).__name__}: {e}"

    def work(task: Task) -> dict:
        entry = {"dataset": task.dataset, "model": task.model, "label": task.label, "loss_mode": task.mode.kind}
        if task.dataset in prep_errors:
            return {**entry, "status": "failed", "error": prep_errors[task.dataset], "artifacts": []}
        try:
            arts = run_task(task, prepared[task.dataset], cfg, out)
            return {**entry, "status": "ok", "artifacts": arts}
        except Exception as e:  # noqa: BLE001 - a failing task must not stop the run
            logger.error("task %s failed: %s", task.stem, e)
            logger.debug(traceback.format_exc())
            return {**entry, "status": "failed", "error": f"{type(e).__name__}: {e}", "artifacts": []}

    with ThreadPoolExecutor(max_workers=threads) as ex:
        entries = list(ex.map(work, tasks))

    manifest = {
        "config": cfg.raw,
        "grid": list(cfg.grid.levels),
        "threads": threads,
        "tasks": entries,
        "failed": sum(e["status"] != "ok" for e in entries),
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, default=str)
    return manifest


# --- improvement reports -------------------------------------------------------------

PAIRINGS = ("feature_T", "loss_asym")


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class PairedResult:
    dataset: str
    model: str  # base model name, without the paired flag
    baseline: float
    treated: float

    @property
    def improved(self) -> bool:
        return self.treated < self.baseline


@dataclass
class ImprovementReport:
    pairing: str
    metric: str
    proportions: dict  # category -> {label: share}
    by_dataset: dict
    deltas: list
    rejected: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _shares(pairs, yes: str, no: str) -> dict:
    k = sum(p.improved for p in pairs)
    return {yes: k / len(pairs), no: (len(pairs) - k) / len(pairs)}


def improvement_report(
    pairs: list[PairedResult], metric: str, pairing: str, rejected: list | None = None
) -> ImprovementReport:
    """Share of pairs whose metric strictly decreased under the treatment.

    ``feature_T`` splits into non-deep (NP/NNP) and deep (DP/DNP) methods;
    ``loss_asym`` reports P/NP over all pairs.  Empty categories are omitted.
    """
    if pairing not in PAIRINGS:
        raise ReportError(f"unknown pairing {pairing!r}")
    keys = [(p.dataset, p.model) for p in pairs]
    if len(set(keys)) != len(keys):
        raise ReportError("duplicate (dataset, model) pair")
    proportions = {}
    if pairing == "feature_T":
        non_deep = [p for p in pairs if not is_deep(p.model)]
        deep = [p for p in pairs if is_deep(p.model)]
        if non_deep:
            proportions["non_deep"] = _shares(non_deep, "NP", "NNP")
        if deep:
            proportions["deep"] = _shares(deep, "DP", "DNP")
    elif pairs:
        proportions["all"] = _shares(pairs, "P", "NP")
    by_dataset = {}
    for name in sorted({p.dataset for p in pairs}):
        by_dataset[name] = _shares([p for p in pairs if p.dataset == name], "P", "NP")
    deltas = [
        {"dataset": p.dataset, "model": p.model, "baseline": p.baseline, "treated": p.treated,
         "delta": p.treated - p.baseline, "improved": p.improved}
        for p in pairs
    ]
    return ImprovementReport(pairing, metric, proportions, by_dataset, deltas, list(rejected or []))


def _treated_label(label: str, pairing: str) -> tuple[str, str] | None:
    """(base model, treated label) for a baseline label, or None if not pairable."""
    if pairing == "feature_T":
        if "-" in label or label.endswith("_T") or f"{label}_T" not in MODEL_NAMES:
            return None
        return label, f"{label}_T"
    if label.endswith("-mse"):
        model = label[: -len("-mse")]
        return model, f"{model}-asym"
    return None


def pairs_from_runs(runs_dir, metric: str, pairing: str) -> tuple[list[PairedResult], list[str]]:
    """Match baseline/treated tasks of a finished run.

    Returns the pairs and the labels of runs that had no partner; those are
    rejected from the proportions rather than counted.
    """
    runs_dir = Path(runs_dir)
    manifest = json.loads((runs_dir / "manifest.json").read_text(encoding="utf-8"))
    wanted_point = pairing == "loss_asym"
    values = {}
    for e in manifest["tasks"]:
        if e["status"] != "ok" or (e["loss_mode"] != "pinball_grid") != wanted_point:
            continue
        meta_file = next(a for a in e["artifacts"] if a.endswith(".meta.json"))
        meta = json.loads((runs_dir / meta_file).read_text(encoding="utf-8"))
        if metric not in meta["metrics"]:
            raise ReportError(f"metric {metric!r} not recorded for {meta_file}")
        values[(e["dataset"], e["label"])] = meta["metrics"][metric]
    pairs, matched, unmatched = [], set(), []
    for (dataset, label), v in sorted(values.items()):
        match = _treated_label(label, pairing)
        if match is None:
            continue
        model, treated = match
        if (dataset, treated) in values:
            pairs.append(PairedResult(dataset, model, v, values[(dataset, treated)]))
            matched |= {(dataset, label), (dataset, treated)}
    for (dataset, label) in sorted(values):
        pairable = _treated_label(label, pairing) is not None or _baseline_exists(label, pairing)
        if pairable and (dataset, label) not in matched:
            unmatched.append(f"{dataset}/{label}")
    if unmatched:
        logger.warning("rejected unmatched runs: %s", ", ".join(unmatched))
    return pairs, unmatched


def _baseline_exists(label: str, pairing: str) -> bool:
    if pairing == "feature_T":
        return label.endswith("_T")
    return label.endswith("-asym")
