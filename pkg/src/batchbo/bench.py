"""Regret experiments on GP sample-path objectives, plus the timing sweep.

Objectives are sample paths drawn at a scrambled low-discrepancy point set and
interpolated by the noiseless posterior mean of the same kernel; the recorded
optimum is the best drawn value, refined by the strategy's own observations so
regrets stay non-negative even when the interpolator overshoots the grid.

Randomness discipline: every stream is derived from (master seed, replicate,
role, batch index, ...) through SeedSequence, never from the strategy list, so
a strategy's trace is identical whether or not other strategies run.  The
confidence-bound construction seed depends only on (master, replicate, batch,
beta multiplier); at the first batch the criterion strategy's 0.1-multiplier
start therefore coincides exactly with the baseline strategies' selection.
"""

from __future__ import annotations

import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from .batchopt import AscentConfig, maximize_qei
from .bucb import BetaSchedule, bucb_batch
from .errors import DuplicatePointError, MathDomainError
from .gp import DomainBox, Kernel, PosteriorGP, sample_path
from .mvn import CdfAccuracy, CdfCallCounter
from .qei import Batch, qei_grad, qei_grad_fd, qei_value

STRATEGIES = ("qei", "bucb1", "bucb2")


@dataclass(frozen=True)
class KernelSpec:
    family: str = "matern32"
    variance: float = 1.0
    range_value: float = 1.0

    def build(self, d: int) -> Kernel:
        return Kernel(self.family, self.variance, np.full(d, self.range_value))


@dataclass(frozen=True)
class ExperimentConfig:
    d: int = 3
    n_init: int = 20
    q: int = 4
    n_batches: int = 5
    n_replicates: int = 10
    kernel: KernelSpec = field(default_factory=KernelSpec)
    m: int = 500
    strategies: tuple[str, ...] = STRATEGIES
    seed: int = 0
    cdf_tol: float = 1e-6
    beta_mult: float = 0.1
    delta: float = 0.1
    threads: int = 1

    def __post_init__(self):
        for name in ("d", "n_init", "q", "n_batches", "n_replicates", "m"):
            if getattr(self, name) < (0 if name == "n_batches" else 1):
                raise ValueError(f"{name} must be positive")
        if not self.strategies:
            raise ValueError("strategy list must be non-empty")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ValueError(f"unknown strategy {s!r}")

    @classmethod
    def desk(cls, **overrides) -> "ExperimentConfig":
        return cls(**overrides)

    @classmethod
    def paper_scale(cls, **overrides) -> "ExperimentConfig":
        base = dict(d=5, n_init=50, q=6, n_batches=10, n_replicates=50, m=2000)
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class RegretTrace:
    replicate: int
    strategy: str
    best_values: tuple[float, ...]   # after init, then after each batch
    optimum: float
    regrets: tuple[float, ...]
    wall_ms: tuple[float, ...]
    first_batch_qei: float
    first_batch_improvement: float
    failed: bool = False


def _stream(master: int, *key) -> np.random.SeedSequence:
    toks = [zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in key]
    return np.random.SeedSequence(entropy=master, spawn_key=tuple(toks))


def _stream_seed(master: int, *key) -> int:
    return int(_stream(master, *key).generate_state(1)[0])


def lhs_design(n: int, d: int, seed: int, exchange_iters: int = 500) -> np.ndarray:
    """Latin hypercube in [0,1]^d improved by maximin point exchange.

    Each column visits every one of the n equal bins exactly once; the
    exchange pass swaps bin assignments between two rows of one column and
    keeps the swap when the minimum pairwise distance grows.
    """
    if n < 2:
        raise ValueError("need n >= 2 for a Latin hypercube")
    rng = np.random.default_rng(seed)
    cells = np.column_stack([rng.permutation(n) for _ in range(d)]).astype(float)
    offsets = rng.random((n, d))
    pts = (cells + offsets) / n

    def min_dist2(arr):
        d2 = np.sum((arr[:, None, :] - arr[None, :, :]) ** 2, axis=2)
        np.fill_diagonal(d2, np.inf)
        return float(np.min(d2))

    best = min_dist2(pts)
    for _ in range(exchange_iters):
        i, j = rng.integers(n), rng.integers(n)
        if i == j:
            continue
        col = int(rng.integers(d))
        pts[[i, j], col] = pts[[j, i], col]
        cand = min_dist2(pts)
        if cand > best:
            best = cand
        else:
            pts[[i, j], col] = pts[[j, i], col]
    return pts


def make_objective(kernel: Kernel, m: int, d: int, seed: int):
    """Sample-path objective: draw at m space-filling points, interpolate.

    Returns (objective, x_star, f_star) with the optimum taken over the drawn
    grid values (maximization convention).
    """
    from scipy.stats import qmc

    if m < 10:
        raise ValueError("need at least 10 interpolation points")
    ss = np.random.SeedSequence(entropy=seed)
    s_grid, s_path = ss.generate_state(2)
    grid = qmc.Halton(d=d, scramble=True, seed=int(s_grid)).random(m)
    vals = sample_path(kernel, 0.0, grid, seed=int(s_path))
    interp = PosteriorGP(kernel, grid, vals)
    istar = int(np.argmax(vals))
    return interp.mean_at, grid[istar].copy(), float(vals[istar])


def _select_batch(strategy: str, model: PosteriorGP, cfg: ExperimentConfig,
                  domain: DomainBox, rep: int, kb: int) -> np.ndarray:
    threshold = float(np.max(model.responses))
    if strategy == "qei":
        mults = (0.05, 0.1, 0.2)
        seeds = tuple(_stream_seed(cfg.seed, rep, "bucb-start", kb, str(bm))
                      for bm in mults)
        acfg = AscentConfig(seed=_stream_seed(cfg.seed, rep, "ascent", kb),
                            start_beta_mults=mults, n_starts=len(mults),
                            cdf_tol_opt=cfg.cdf_tol)
        res = maximize_qei(model, threshold, cfg.q, domain, acfg,
                           schedule_k=kb, start_seeds=seeds)
        return res.best_batch
    variant = strategy
    sched = BetaSchedule(variant, beta_mult=cfg.beta_mult, delta=cfg.delta,
                         dim=cfg.d, batch_size=cfg.q)
    seed = _stream_seed(cfg.seed, rep, "bucb-start", kb, str(cfg.beta_mult))
    return bucb_batch(model, cfg.q, sched, kb, domain, seed=seed, maximize=True)


def _augment_tolerant(model: PosteriorGP, pts, ys) -> PosteriorGP:
    """Condition on batch responses, skipping points the model already knows.

    A strategy may re-propose an evaluated location (typically a box corner);
    the response is recorded in the trace either way, and a duplicate carries
    no new information for the posterior.
    """
    for x, y in zip(np.atleast_2d(pts), np.atleast_1d(ys)):
        try:
            model = model.augment(x, float(y))
        except DuplicatePointError:
            continue
    return model


def _run_replicate(cfg: ExperimentConfig, rep: int) -> list[RegretTrace]:
    kernel = cfg.kernel.build(cfg.d)
    domain = DomainBox.unit(cfg.d)
    objective, _, f_star = make_objective(
        kernel, cfg.m, cfg.d, seed=_stream_seed(cfg.seed, rep, "objective"))
    design = lhs_design(cfg.n_init, cfg.d,
                        seed=_stream_seed(cfg.seed, rep, "design"))
    y0 = np.array([objective(x) for x in design])
    acc = CdfAccuracy(tolerance=cfg.cdf_tol)

    traces = []
    for strategy in cfg.strategies:
        model = PosteriorGP(kernel, design, y0)
        best = [float(np.max(y0))]
        walls = []
        fb_qei = float("nan")
        fb_improve = float("nan")
        failed = False
        for kb in range(cfg.n_batches):
            t0 = time.perf_counter()
            try:
                pts = _select_batch(strategy, model, cfg, domain, rep, kb)
            except MathDomainError:
                failed = True
                break
            walls.append(1e3 * (time.perf_counter() - t0))
            if kb == 0:
                fb_qei = qei_value(model, Batch(pts, domain), best[-1], acc)
            yb = np.array([objective(x) for x in pts])
            if kb == 0:
                fb_improve = max(float(np.max(yb)) - best[-1], 0.0)
            model = _augment_tolerant(model, pts, yb)
            best.append(max(best[-1], float(np.max(yb))))
        optimum = max(f_star, best[-1])
        regrets = tuple(max(optimum - t, 0.0) for t in best)
        traces.append(RegretTrace(
            replicate=rep, strategy=strategy, best_values=tuple(best),
            optimum=optimum, regrets=regrets, wall_ms=tuple(walls),
            first_batch_qei=fb_qei, first_batch_improvement=fb_improve,
            failed=failed))
    return traces


_LOG_FLOOR = 1e-12


def summarize(traces: list[RegretTrace], cfg: ExperimentConfig) -> dict:
    """Per-strategy regret aggregates and the first-batch comparison table."""
    out = {"config": config_to_dict(cfg), "strategies": {}, "first_batch": []}
    for strategy in cfg.strategies:
        rows = [t for t in traces if t.strategy == strategy and not t.failed]
        if not rows:
            out["strategies"][strategy] = {"n": 0}
            continue
        reg = np.array([t.regrets for t in rows])
        out["strategies"][strategy] = {
            "n": len(rows),
            "mean_log_regret": np.log(np.maximum(reg, _LOG_FLOOR)).mean(axis=0).tolist(),
            "q95_regret": np.quantile(reg, 0.95, axis=0).tolist(),
            "mean_regret": reg.mean(axis=0).tolist(),
        }
        out["first_batch"].append({
            "strategy": strategy,
            "mean_qei": float(np.mean([t.first_batch_qei for t in rows])),
            "mean_realized_improvement":
                float(np.mean([t.first_batch_improvement for t in rows])),
        })
    return out


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "d": cfg.d, "n_init": cfg.n_init, "q": cfg.q,
        "n_batches": cfg.n_batches, "n_replicates": cfg.n_replicates,
        "kernel": {"family": cfg.kernel.family, "variance": cfg.kernel.variance,
                   "range": cfg.kernel.range_value},
        "m": cfg.m, "strategies": list(cfg.strategies), "seed": cfg.seed,
        "cdf_tol": cfg.cdf_tol, "beta_mult": cfg.beta_mult, "delta": cfg.delta,
    }


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    preset = data.pop("preset", None)
    kern = data.pop("kernel", {})
    kwargs = dict(data)
    if kern:
        kwargs["kernel"] = KernelSpec(
            family=kern.get("family", "matern32"),
            variance=kern.get("variance", 1.0),
            range_value=kern.get("range", kern.get("range_value", 1.0)))
    if "strategies" in kwargs:
        kwargs["strategies"] = tuple(kwargs["strategies"])
    if preset == "paper-scale":
        return ExperimentConfig.paper_scale(**kwargs)
    if preset in (None, "desk"):
        return ExperimentConfig.desk(**kwargs)
    raise ValueError(f"unknown preset {preset!r}")


def run_experiment(cfg: ExperimentConfig) -> tuple[list[RegretTrace], dict]:
    """All replicates of all strategies; deterministic given the config."""
    if cfg.threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            chunks = list(pool.map(lambda r: _run_replicate(cfg, r),
                                   range(cfg.n_replicates)))
    else:
        chunks = [_run_replicate(cfg, rep) for rep in range(cfg.n_replicates)]
    traces = [t for chunk in chunks for t in chunk]
    return traces, summarize(traces, cfg)


def traces_to_rows(traces: list[RegretTrace]) -> list[dict]:
    """Flatten traces for the results CSV: one row per (replicate, strategy, batch)."""
    rows = []
    for t in traces:
        for kb, (bv, rg) in enumerate(zip(t.best_values, t.regrets)):
            rows.append({
                "replicate": t.replicate, "strategy": t.strategy,
                "batch_index": kb, "best_value": bv, "regret": rg,
                "wall_ms": t.wall_ms[kb - 1] if kb >= 1 else 0.0,
            })
    return rows


def timing_sweep(d_list, q_list, repeats: int, seed: int,
                 cdf_tol: float = 1e-6) -> list[dict]:
    """Analytic-vs-finite-difference gradient timing on sample-path models.

    The finite-difference side runs central differences of the criterion value
    (2*q*d evaluations).  CDF call counts per gradient evaluation come from
    the instrumented counters and do not depend on the repeat count.
    """
    rows = []
    for d in d_list:
        kernel = Kernel("matern32", 1.0, np.ones(d))
        domain = DomainBox.unit(d)
        n = min(10 + 5 * d, 40)
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(d,))
        s_design, s_path, s_batches = ss.generate_state(3)
        design = lhs_design(n, d, seed=int(s_design))
        y = sample_path(kernel, 0.0, design, seed=int(s_path))
        model = PosteriorGP(kernel, design, y)
        threshold = float(np.max(y))
        acc = CdfAccuracy(tolerance=cdf_tol)
        rng = np.random.default_rng(int(s_batches))
        for q in q_list:
            batches = [Batch(domain.sample(rng, q), domain) for _ in range(repeats)]
            counter_an = CdfCallCounter()
            t0 = time.perf_counter()
            for b in batches:
                qei_grad(model, b, threshold, acc, counter_an)
            t_an = (time.perf_counter() - t0) / repeats
            counter_fd = CdfCallCounter()
            t0 = time.perf_counter()
            for b in batches:
                qei_grad_fd(model, b, threshold, acc, counter=counter_fd)
            t_fd = (time.perf_counter() - t0) / repeats
            rows.append({
                "d": d, "q": q,
                "t_analytic_ms": 1e3 * t_an, "t_fd_ms": 1e3 * t_fd,
                "ratio": t_fd / t_an,
                "cdf_calls_analytic": counter_an.total() // repeats,
                "cdf_calls_fd": counter_fd.total() // repeats,
                "cdf_calls_analytic_by_dim":
                    {p: c // repeats for p, c in sorted(counter_an.snapshot().items())},
            })
    return rows
