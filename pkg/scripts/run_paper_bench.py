#!/usr/bin/env python3
"""Paper-scale regret experiment: d=5, n=50, q=6, 10 batches, 50 replicates.

This is hours of compute; it exists to reproduce the full-size study, not for
CI.  Start with run_desk_bench.py unless you mean it.
"""

import argparse
import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from batchbo.bench import ExperimentConfig, run_experiment, traces_to_rows
from batchbo.cli import atomic_write, render_regret_svg, _write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/paper")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--replicates", type=int, default=50)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    cfg = ExperimentConfig.paper_scale(seed=args.seed,
                                       n_replicates=args.replicates,
                                       threads=args.threads)
    traces, summary = run_experiment(cfg)
    os.makedirs(args.out, exist_ok=True)
    _write_csv(os.path.join(args.out, "results.csv"), traces_to_rows(traces),
               ["replicate", "strategy", "batch_index", "best_value",
                "regret", "wall_ms"])
    atomic_write(os.path.join(args.out, "summary.json"),
                 json.dumps(summary, indent=2, sort_keys=True))
    atomic_write(os.path.join(args.out, "regret.svg"),
                 render_regret_svg(summary))
    print(f"outputs in {args.out}")


if __name__ == "__main__":
    main()
