"""Command-line entry point: ``loadbench {run,report,fit-loss,synth}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import pandas as pd

from .bench import PAIRINGS, ConfigError, ReportError, RunConfig, improvement_report, pairs_from_runs, run_benchmark
from .ingest import to_csv
from .lossfit import LossFitError, fit_loss
from .synth import SynthSpec, synth_dataset

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("loadbench")


def cmd_run(args) -> int:
    cfg = RunConfig.load(args.config)
    manifest = run_benchmark(cfg, args.threads)
    n = len(manifest["tasks"])
    print(f"{n - manifest['failed']}/{n} tasks succeeded; manifest in {Path(cfg.output_dir) / 'manifest.json'}")
    return EXIT_PARTIAL if manifest["failed"] else EXIT_OK


def cmd_report(args) -> int:
    try:
        pairs, rejected = pairs_from_runs(args.runs, args.metric, args.pairing)
        report = improvement_report(pairs, args.metric, args.pairing, rejected)
    except (OSError, KeyError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read runs in {args.runs}: {e}") from e
    text = json.dumps(report.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_fit_loss(args) -> int:
    try:
        df = pd.read_csv(args.input)
        eps, cost = df[args.eps_column].to_numpy(float), df[args.cost_column].to_numpy(float)
    except (OSError, KeyError, ValueError) as e:
        raise ConfigError(f"cannot read cost samples from {args.input}: {e}") from e
    fit = fit_loss(eps, cost, args.tolerance)
    payload = json.loads(fit.loss.to_json())
    payload.update(K=fit.K, bound=fit.bound, tolerance=args.tolerance)
    Path(args.out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    print(f"K={fit.K} segments, L2 bound {fit.bound:.3g}; wrote {args.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        spec = SynthSpec.from_json(Path(args.spec).read_text(encoding="utf-8")) if args.spec else SynthSpec()
    except (OSError, TypeError, json.JSONDecodeError) as e:
        raise ConfigError(f"bad synth spec: {e}") from e
    to_csv(synth_dataset(spec, args.seed), args.out)
    print(f"wrote {spec.n_hours} rows to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loadbench", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a benchmark config")
    r.add_argument("--config", required=True)
    r.add_argument("--threads", type=int, default=None, help="default: LOADBENCH_THREADS or CPU count")
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="improvement proportions over a finished run")
    rep.add_argument("--runs", required=True)
    rep.add_argument("--pairing", choices=PAIRINGS, required=True)
    rep.add_argument("--metric", default="pinball")
    rep.add_argument("--out", default=None)
    rep.set_defaults(func=cmd_report)

    f = sub.add_parser("fit-loss", help="fit a smoothed piecewise-linear loss to cost samples")
    f.add_argument("--input", required=True)
    f.add_argument("--tolerance", type=float, default=0.01)
    f.add_argument("--out", required=True)
    f.add_argument("--eps-column", default="epsilon")
    f.add_argument("--cost-column", default="cost")
    f.set_defaults(func=cmd_fit_loss)

    s = sub.add_parser("synth", help="write a synthetic dataset CSV")
    s.add_argument("--spec", default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ReportError, LossFitError) as e:
        print(f"loadbench: error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
