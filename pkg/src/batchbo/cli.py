"""Command-line surface: eval, gradcheck, bench, plot, timing.

Exit codes: 0 success, 1 usage/parse problems, 2 math/domain failures.  All
randomness flows from --seed (default 0, never wall clock).  Output files are
written atomically (temp file + rename) and each bench run drops a manifest
with a config hash that is stable under key reordering.

Model/batch file format (JSON):

    model: {"kernel": {"family": "matern52", "variance": 1.0,
                       "ranges": [0.5, 0.5]},
            "mean": 0.0,
            "design": [[...], ...], "responses": [...],
            "domain": {"lower": [...], "upper": [...]}}
    batch: {"points": [[...], ...]}
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .bench import (config_from_dict, config_to_dict, run_experiment,
                    timing_sweep, traces_to_rows)
from .errors import MathDomainError
from .gp import DomainBox, Kernel, PosteriorGP
from .mvn import CdfAccuracy, CdfCallCounter
from .qei import Batch, qei_grad, qei_grad_fd, qei_value

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MATH = 2


class ParseFailure(Exception):
    """Bad input file or config; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def config_hash(data: dict) -> str:
    canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _load_json(path: str) -> dict:
    try:
        with open(path) as handle:
            return json.load(handle)
    except OSError as exc:
        raise ParseFailure(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseFailure(
            f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _need(data: dict, key: str, where: str):
    if key not in data:
        raise ParseFailure(f"{where}: missing required field /{key}")
    return data[key]


def load_model(path: str) -> tuple[PosteriorGP, DomainBox]:
    data = _load_json(path)
    kern = _need(data, "kernel", path)
    for key in ("family", "variance", "ranges"):
        _need(kern, key, f"{path}: /kernel")
    dom = _need(data, "domain", path)
    try:
        kernel = Kernel(kern["family"], float(kern["variance"]),
                        np.asarray(kern["ranges"], dtype=float))
        domain = DomainBox(np.asarray(_need(dom, "lower", f"{path}: /domain"), dtype=float),
                           np.asarray(_need(dom, "upper", f"{path}: /domain"), dtype=float))
        design = np.asarray(_need(data, "design", path), dtype=float)
        responses = np.asarray(_need(data, "responses", path), dtype=float)
        if design.size == 0:
            design = design.reshape(0, domain.dim)
        model = PosteriorGP(kernel, design, responses,
                            mean=float(data.get("mean", 0.0)))
    except (ValueError, TypeError) as exc:
        raise ParseFailure(f"{path}: {exc}") from exc
    return model, domain


def load_batch(path: str, domain: DomainBox) -> Batch:
    data = _load_json(path)
    raw = _need(data, "points", path) if isinstance(data, dict) else data
    try:
        pts = np.asarray(raw, dtype=float)
        if pts.ndim != 2:
            raise ValueError("points must be a list of coordinate rows")
    except (ValueError, TypeError) as exc:
        raise ParseFailure(f"{path}: {exc}") from exc
    for ridx, row in enumerate(pts):
        if row.size != domain.dim:
            raise ParseFailure(
                f"{path}: /points/{ridx}: row has {row.size} coordinates, domain has {domain.dim}")
        if not domain.contains(row, tol=1e-12):
            raise ParseFailure(f"{path}: /points/{ridx}: point outside the domain box")
    return Batch(pts, domain)


def _counts_table(counts: dict[int, int]) -> str:
    lines = ["cdf calls by dimension:"]
    for p in sorted(counts, reverse=True):
        lines.append(f"  dim {p}: {counts[p]}")
    lines.append(f"  total: {sum(counts.values())}")
    return "\n".join(lines)


def _threshold(args, model: PosteriorGP) -> float:
    if args.threshold is not None:
        return args.threshold
    if not model.n:
        raise ParseFailure("--threshold is required for models with no observations")
    return float(np.max(model.responses))


def cmd_eval(args) -> int:
    model, domain = load_model(args.model)
    batch = load_batch(args.batch, domain)
    counter = CdfCallCounter()
    acc = CdfAccuracy(tolerance=args.cdf_tol or 1e-7, seed=args.seed)
    value = qei_value(model, batch, _threshold(args, model), acc, counter)
    print(f"qei = {value:.12g}")
    print(_counts_table(counter.snapshot()))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    model, domain = load_model(args.model)
    batch = load_batch(args.batch, domain)
    threshold = _threshold(args, model)
    acc = CdfAccuracy(tolerance=args.cdf_tol or 1e-7, seed=args.seed)
    res = qei_grad(model, batch, threshold, acc)
    fd = qei_grad_fd(model, batch, threshold, acc, step=args.fd_step)
    worst = (0, 0, 0.0)
    n_fail = 0
    # coordinates with a tiny reference are compared absolutely, at a floor
    # that scales with the requested relative tolerance
    abs_floor = args.tolerance * 1e-5
    print(f"value = {res.value:.12g}")
    print("coord   analytic        fd              err")
    for j in range(batch.q):
        for ell in range(batch.dim):
            a, b = res.gradient[j, ell], fd[j, ell]
            if abs(b) < 1e-9:
                rel = abs(a - b)
                ok = rel <= abs_floor
            else:
                rel = abs(a - b) / abs(b)
                ok = rel <= args.tolerance
            if not ok:
                n_fail += 1
            if rel >= worst[2]:
                worst = (j, ell, rel)
            print(f"[{j},{ell}]  {a: .9e}  {b: .9e}  {rel:.3e}{'' if ok else '  FAIL'}")
    if n_fail:
        print(f"FAIL: {n_fail} coordinate(s) above tolerance "
              f"{args.tolerance:g}; worst at {worst[0], worst[1]} rel_err {worst[2]:.3e}")
        return EXIT_MATH
    print(f"PASS: all {batch.q * batch.dim} coordinates within {args.tolerance:g}")
    return EXIT_OK


def _write_csv(path: str, rows: list[dict], columns: list[str]) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore",
                            lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    atomic_write(path, buf.getvalue())


def cmd_bench(args) -> int:
    raw = _load_json(args.config)
    if not isinstance(raw, dict):
        raise ParseFailure(f"{args.config}: top-level value must be an object")
    allowed = {"preset", "d", "n_init", "q", "n_batches", "n_replicates",
               "kernel", "m", "strategies", "seed", "cdf_tol", "beta_mult",
               "delta", "threads"}
    for key in raw:
        if key not in allowed:
            raise ParseFailure(f"{args.config}: /{key}: unknown field")
    if args.seed is not None:
        raw.setdefault("seed", args.seed)
    if args.cdf_tol is not None:
        raw.setdefault("cdf_tol", args.cdf_tol)
    if args.threads != 1:
        raw["threads"] = args.threads
    try:
        cfg = config_from_dict(raw)
    except (ValueError, TypeError) as exc:
        raise ParseFailure(f"{args.config}: {exc}") from exc
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    traces, summary = run_experiment(cfg)
    elapsed = time.perf_counter() - t0
    outdir = args.output_dir
    os.makedirs(outdir, exist_ok=True)
    results_path = os.path.join(outdir, "results.csv")
    summary_path = os.path.join(outdir, "summary.json")
    manifest_path = os.path.join(outdir, "manifest.json")
    _write_csv(results_path, traces_to_rows(traces),
               ["replicate", "strategy", "batch_index", "best_value",
                "regret", "wall_ms"])
    atomic_write(summary_path, json.dumps(summary, indent=2, sort_keys=True))
    manifest = {
        "config_hash": config_hash(config_to_dict(cfg)),
        "tool_version": __version__,
        "master_seed": cfg.seed,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "elapsed_s": elapsed,
        "outputs": [os.path.basename(results_path), os.path.basename(summary_path)],
    }
    atomic_write(manifest_path, json.dumps(manifest, indent=2, sort_keys=True))
    print(f"wrote {results_path}, {summary_path}, {manifest_path} "
          f"({elapsed:.1f}s)")
    return EXIT_OK


def _svg_polyline(xs, ys, color, dotted=False) -> str:
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    dash = ' stroke-dasharray="4 3"' if dotted else ""
    return (f'<polyline fill="none" stroke="{color}" stroke-width="1.5"'
            f'{dash} points="{pts}" />')


_COLORS = ("#1b6ca8", "#c0392b", "#27ae60", "#8e44ad", "#d4880c", "#16a085")


def render_regret_svg(summary: dict, width: int = 640, height: int = 420) -> str:
    """Line chart: solid mean log-regret, dotted 95% quantile, per strategy."""
    strategies = [s for s, rec in summary.get("strategies", {}).items()
                  if rec.get("n", 0) > 0]
    if not strategies:
        raise ParseFailure("summary contains no strategy results")
    floor = 1e-12
    series = {}
    for s in strategies:
        rec = summary["strategies"][s]
        mean_log = rec["mean_log_regret"]
        q95_log = [math.log(max(v, floor)) for v in rec["q95_regret"]]
        series[s] = (mean_log, q95_log)
    n_iter = max(len(v[0]) for v in series.values())
    all_y = [y for pair in series.values() for arr in pair for y in arr]
    ylo, yhi = min(all_y), max(all_y)
    if yhi - ylo < 1e-9:
        ylo, yhi = ylo - 1.0, yhi + 1.0
    mleft, mright, mtop, mbot = 60, 150, 20, 45

    def sx(i):
        return mleft + (width - mleft - mright) * (i / max(n_iter - 1, 1))

    def sy(v):
        return mtop + (height - mtop - mbot) * (1.0 - (v - ylo) / (yhi - ylo))

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">',
             '<rect width="100%" height="100%" fill="white" />',
             f'<line x1="{mleft}" y1="{height-mbot}" x2="{width-mright}" '
             f'y2="{height-mbot}" stroke="black" />',
             f'<line x1="{mleft}" y1="{mtop}" x2="{mleft}" '
             f'y2="{height-mbot}" stroke="black" />',
             f'<text x="{(mleft+width-mright)/2:.0f}" y="{height-10}" '
             'text-anchor="middle" font-size="12">batch index</text>',
             f'<text x="15" y="{(mtop+height-mbot)/2:.0f}" font-size="12" '
             f'transform="rotate(-90 15 {(mtop+height-mbot)/2:.0f})" '
             'text-anchor="middle">log regret</text>']
    for i in range(n_iter):
        parts.append(f'<text x="{sx(i):.1f}" y="{height-mbot+15}" '
                     f'text-anchor="middle" font-size="10">{i}</text>')
    for idx, s in enumerate(strategies):
        color = _COLORS[idx % len(_COLORS)]
        mean_log, q95_log = series[s]
        xs = [sx(i) for i in range(len(mean_log))]
        if len(mean_log) == 1:
            parts.append(f'<circle cx="{xs[0]:.2f}" cy="{sy(mean_log[0]):.2f}" '
                         f'r="3" fill="{color}" />')
            parts.append(f'<circle cx="{xs[0]:.2f}" cy="{sy(q95_log[0]):.2f}" '
                         f'r="3" fill="none" stroke="{color}" />')
        else:
            parts.append(_svg_polyline(xs, [sy(v) for v in mean_log], color))
            parts.append(_svg_polyline(xs, [sy(v) for v in q95_log], color,
                                       dotted=True))
        ytxt = mtop + 16 * (idx + 1)
        parts.append(f'<line x1="{width-mright+10}" y1="{ytxt-4}" '
                     f'x2="{width-mright+40}" y2="{ytxt-4}" stroke="{color}" '
                     'stroke-width="1.5" />')
        parts.append(f'<text x="{width-mright+45}" y="{ytxt}" '
                     f'font-size="12">{s}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def cmd_plot(args) -> int:
    summary = _load_json(args.summary)
    svg = render_regret_svg(summary)
    atomic_write(args.output, svg)
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_timing(args) -> int:
    try:
        d_list = [int(v) for v in args.dims.split(",") if v]
        q_list = [int(v) for v in args.batch_sizes.split(",") if v]
    except ValueError as exc:
        raise ParseFailure(f"bad dimension/batch list: {exc}") from exc
    if not d_list or not q_list:
        raise ParseFailure("dimension and batch-size lists must be non-empty")
    rows = timing_sweep(d_list, q_list, repeats=args.repeats, seed=args.seed,
                        cdf_tol=args.cdf_tol or 1e-6)
    cols = ["d", "q", "t_analytic_ms", "t_fd_ms", "ratio",
            "cdf_calls_analytic", "cdf_calls_fd"]
    if args.output:
        _write_csv(args.output, rows, cols)
        print(f"wrote {args.output}")
    else:
        print(",".join(cols))
        for row in rows:
            print(",".join(str(row[c]) for c in cols))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="batchbo",
                     description="batch Bayesian optimization toolbox")
    parser.add_argument("--seed", type=int, default=0,
                        help="master seed for all randomness (default 0)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for the benchmark replicates")
    parser.add_argument("--cdf-tol", type=float, default=None, dest="cdf_tol",
                        help="absolute tolerance for CDF integration "
                             "(default 1e-7; bench configs may set their own)")
    parser.add_argument("--output-dir", default="out", dest="output_dir",
                        help="directory for bench outputs")
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="evaluate the batch criterion")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--batch", required=True)
    p_eval.add_argument("--threshold", type=float, default=None,
                        help="improvement threshold (default: best observed)")
    p_eval.set_defaults(func=cmd_eval)

    p_grad = sub.add_parser("gradcheck",
                            help="compare analytic and finite-difference gradients")
    p_grad.add_argument("--model", required=True)
    p_grad.add_argument("--batch", required=True)
    p_grad.add_argument("--threshold", type=float, default=None)
    p_grad.add_argument("--fd-step", type=float, default=1e-5, dest="fd_step")
    p_grad.add_argument("--tolerance", type=float, default=1e-3)
    p_grad.set_defaults(func=cmd_gradcheck)

    p_bench = sub.add_parser("bench", help="run the regret experiment")
    p_bench.add_argument("--config", required=True)
    p_bench.set_defaults(func=cmd_bench)

    p_plot = sub.add_parser("plot", help="render the regret summary as SVG")
    p_plot.add_argument("--summary", required=True)
    p_plot.add_argument("--output", required=True)
    p_plot.set_defaults(func=cmd_plot)

    p_tim = sub.add_parser("timing",
                           help="analytic vs finite-difference gradient timing")
    p_tim.add_argument("--dims", default="1,2,5")
    p_tim.add_argument("--batch-sizes", default="2,3", dest="batch_sizes")
    p_tim.add_argument("--repeats", type=int, default=3)
    p_tim.add_argument("--output", default=None)
    p_tim.set_defaults(func=cmd_timing)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MathDomainError as exc:
        print(f"math error: {exc}", file=sys.stderr)
        return EXIT_MATH


if __name__ == "__main__":
    sys.exit(main())
