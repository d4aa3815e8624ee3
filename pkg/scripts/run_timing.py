#!/usr/bin/env python3
"""Timing sweep: analytic gradient vs central finite differences.

Prints one line per (d, q) cell with wall times, their ratio, and the exact
CDF call counts per gradient evaluation.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from batchbo.bench import timing_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dims", default="1,2,5,10")
    ap.add_argument("--batch-sizes", default="2,3,4")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    d_list = [int(v) for v in args.dims.split(",")]
    q_list = [int(v) for v in args.batch_sizes.split(",")]
    rows = timing_sweep(d_list, q_list, repeats=args.repeats, seed=args.seed)
    print(f"{'d':>3} {'q':>3} {'analytic ms':>12} {'fd ms':>12} "
          f"{'ratio':>8}  {'cdf calls (analytic/fd)'}")
    for r in rows:
        print(f"{r['d']:>3} {r['q']:>3} {r['t_analytic_ms']:>12.2f} "
              f"{r['t_fd_ms']:>12.2f} {r['ratio']:>8.2f}  "
              f"{r['cdf_calls_analytic']}/{r['cdf_calls_fd']}")


if __name__ == "__main__":
    main()
