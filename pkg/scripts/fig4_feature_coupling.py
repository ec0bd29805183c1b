"""Improvement proportions of the coupled calendar x temperature features.

Runs every model with and without the ``_T`` feature blocks on a handful of
synthetic datasets, then prints the NP/NNP (non-deep) and DP/DNP (deep)
shares of pairs whose grand-mean pinball dropped.

    python3 scripts/fig4_feature_coupling.py --out runs/fig4 [--quick]
"""

import argparse
import json
from pathlib import Path

from loadbench.bench import RunConfig, improvement_report, pairs_from_runs, run_benchmark

PAIRED = ["QCE", "QKNNR", "QRFR", "QSRFR", "QERT", "QSERT", "FFNN"]

# aggregated-like and building-like regimes
DATASETS = [
    {"name": "agg_a", "synth": {"noise": 0.03}, "seed": 1},
    {"name": "agg_b", "synth": {"noise": 0.03, "cooling_slope": 45.0}, "seed": 2},
    {"name": "bldg_a", "synth": {"noise": 0.12, "base": 200.0, "heating_slope": 5.0, "cooling_slope": 8.0}, "seed": 3},
    {"name": "bldg_b", "synth": {"noise": 0.15, "base": 150.0, "weekday_factors": [1, 1, 1, 1, 1, 0.2, 0.1]}, "seed": 4},
]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/fig4")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--quick", action="store_true", help="one-year series and small models")
    args = p.parse_args(argv)

    datasets = [dict(d, synth=dict(d["synth"])) for d in DATASETS]
    options = {"forest": {"n_trees": 50}, "net": {"epochs": 60}}
    if args.quick:
        for d in datasets:
            d["synth"]["n_hours"] = 24 * 365
        options = {"forest": {"n_trees": 10}, "net": {"epochs": 10, "hidden_width": 32}}
    cfg = RunConfig.from_dict({
        "datasets": datasets,
        "models": [m for name in PAIRED for m in (name, f"{name}_T")],
        "output_dir": args.out,
        "model_options": options,
    })
    manifest = run_benchmark(cfg, args.threads)
    pairs, rejected = pairs_from_runs(args.out, "pinball", "feature_T")
    report = improvement_report(pairs, "pinball", "feature_T", rejected)
    Path(args.out, "fig4_report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    print(json.dumps(report.proportions, indent=2))
    return 1 if manifest["failed"] else 0


if __name__ == "__main__":
    raise SystemExit(main())
