"""Improvement proportions of a fitted asymmetric loss over MSE.

Trains the point FFNN_T twice per dataset, once on MSE and once on a loss
fitted to simulated dispatch costs, and prints the P/NP shares of datasets
where MAPE (and the simulator's true cost) went down.

    python3 scripts/fig5_asymmetric_loss.py --out runs/fig5 [--quick]
"""

import argparse
import json
from pathlib import Path

from loadbench.bench import RunConfig, improvement_report, pairs_from_runs, run_benchmark

DATASETS = [
    {"name": f"syn{seed}", "synth": {"noise": noise}, "seed": seed}
    for seed, noise in enumerate((0.05, 0.1, 0.15, 0.2, 0.1, 0.15))
]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/fig5")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--tolerance", type=float, default=0.01)
    p.add_argument("--quick", action="store_true", help="one-year series and fewer epochs")
    args = p.parse_args(argv)

    datasets = [dict(d, synth=dict(d["synth"])) for d in DATASETS]
    net = {"epochs": 100}
    if args.quick:
        for d in datasets:
            d["synth"]["n_hours"] = 24 * 365
        net = {"epochs": 15, "hidden_width": 32}
    asym = {"kind": "asymmetric", "simulate": {"seed": 0}, "tolerance": args.tolerance}
    cfg = RunConfig.from_dict({
        "datasets": datasets,
        "models": ["FFNN_T"],
        "loss_modes": {"FFNN_T": ["mse", asym]},
        "output_dir": args.out,
        "model_options": {"net": net},
    })
    manifest = run_benchmark(cfg, args.threads)
    out = {}
    for metric in ("mape", "true_cost"):
        pairs, rejected = pairs_from_runs(args.out, metric, "loss_asym")
        report = improvement_report(pairs, metric, "loss_asym", rejected)
        Path(args.out, f"fig5_report_{metric}.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        out[metric] = report.proportions
    print(json.dumps(out, indent=2))
    return 1 if manifest["failed"] else 0


if __name__ == "__main__":
    raise SystemExit(main())
