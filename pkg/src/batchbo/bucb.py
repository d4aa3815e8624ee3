"""Batch upper-confidence-bound baseline with believer updates.

A batch is built point by point: each point optimizes the confidence bound of
the posterior that treats the already-selected points as observed at their
posterior means, so selected points lose their variance and stop attracting
the next pick.  Two exploration schedules are provided; they coincide at the
first batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateScheduleError, DuplicatePointError,
                     LineSearchError, MathDomainError)
from .gp import DomainBox, PosteriorGP, believer_augment

VARIANTS = ("bucb1", "bucb2")
# posterior sd below this switches the bound's gradient to pure mean descent
_SD_FLOOR = 1e-8


@dataclass(frozen=True)
class BetaSchedule:
    """Exploration coefficients beta_k for the confidence bound.

    bucb1 grows with the batch counter k, bucb2 with the number of selected
    points 1 + q*k; both share beta at k = 0.
    """

    variant: str
    beta_mult: float = 0.1
    delta: float = 0.1
    dim: int = 1
    batch_size: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if not self.beta_mult > 0.0:
            raise ValueError("beta_mult must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.dim < 1 or self.batch_size < 1:
            raise ValueError("dim and batch_size must be positive")


def beta(schedule: BetaSchedule, k: int) -> float:
    """Exploration coefficient before selecting batch k (k = 0, 1, ...)."""
    if k < 0:
        raise ValueError("batch index must be non-negative")
    base = math.pi ** 2 * schedule.dim / (6.0 * schedule.delta)
    if schedule.variant == "bucb1":
        grow = (k + 1) ** 2
    else:
        grow = (1 + schedule.batch_size * k) ** 2
    arg = base * grow
    if arg <= 1.0:
        raise DegenerateScheduleError(
            f"log argument {arg:.6g} <= 1 yields a non-positive coefficient")
    return 2.0 * schedule.beta_mult * math.log(arg)


def _quantile_fg(model: PosteriorGP, beta_k: float, maximize: bool):
    """Objective/gradient of the bound, oriented so higher is better.

    Minimization problems score -(mu - beta*s), maximization mu + beta*s.
    """
    sign = 1.0 if maximize else -1.0

    def fg(x):
        mu = model.mean_at(x)
        sd = model.sd_at(x)
        gmu = model.mean_grad(x)
        if sd < _SD_FLOOR:
            return sign * mu, sign * gmu
        gsd = model.var_grad(x) / (2.0 * sd)
        return sign * mu + beta_k * sd, sign * gmu + beta_k * gsd

    return fg


def _optimize_bound(model: PosteriorGP, beta_k: float, domain: DomainBox,
                    maximize: bool, seed: int,
                    n_lhs: int = 20, n_probe: int = 200,
                    max_iterations: int = 80) -> np.ndarray:
    """Multistart gradient ascent on the bound: LHS starts plus the best probe."""
    from .batchopt import bounded_quasi_newton
    from .bench import lhs_design

    rng = np.random.default_rng(seed)
    unit = lhs_design(n_lhs, domain.dim, seed=int(rng.integers(2 ** 62)))
    starts = domain.lower + unit * (domain.upper - domain.lower)
    probes = domain.sample(rng, n_probe)
    fg = _quantile_fg(model, beta_k, maximize)
    probe_vals = np.array([fg(p)[0] for p in probes])
    starts = np.vstack([starts, probes[int(np.argmax(probe_vals))]])

    best_x, best_v = None, -np.inf
    for x0 in starts:
        try:
            x, v, _ = bounded_quasi_newton(
                fg, x0, domain.lower, domain.upper,
                max_iterations=max_iterations, grad_tol=1e-7, value_tol=1e-12)
        except MathDomainError:
            continue
        if v > best_v:
            best_x, best_v = x, v
    if best_x is None:
        raise LineSearchError("confidence-bound optimization failed at every start")
    return best_x


def bucb_batch(model: PosteriorGP, q: int, schedule: BetaSchedule, k: int,
               domain: DomainBox, seed: int, maximize: bool = False) -> np.ndarray:
    """Select q points sequentially under believer updates; model is untouched."""
    beta_k = beta(schedule, k)
    working = model
    rng = np.random.default_rng(seed)
    points = np.empty((q, domain.dim))
    for j in range(q):
        x = _optimize_bound(working, beta_k, domain, maximize,
                            seed=int(rng.integers(2 ** 62)))
        for _ in range(50):
            try:
                working = believer_augment(working, x)
                break
            except DuplicatePointError:
                # bound optimum fell on an existing point; nudge off it
                x = domain.clip(x + rng.normal(0.0, 1e-6 * domain.diagonal(),
                                               domain.dim))
        else:
            raise DuplicatePointError("could not separate the selected point")
        points[j] = x
    return points
