"""Gaussian process prior/posterior for noiseless observations.

Kernels are separable (per-dimension product) Matern 3/2, Matern 5/2, or
gaussian, with a constant prior mean.  The posterior exposes the spatial
gradients of its mean and covariance, which the improvement-criterion
gradient chains through.

Matern 3/2 is once but not twice differentiable at coincident points; its
per-coordinate profile has derivative zero at distance zero, so posterior
gradients exist everywhere except exactly at design points, where gradient
evaluation raises NonSmoothPointError for this family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DuplicatePointError, NonSmoothPointError
from .mvn import jittered_cholesky

KERNEL_FAMILIES = ("matern32", "matern52", "gaussian")

_SQRT3 = math.sqrt(3.0)
_SQRT5 = math.sqrt(5.0)


@dataclass(frozen=True)
class DomainBox:
    """Axis-aligned box domain."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("lower/upper must be 1-d arrays of equal length")
        if not np.all(self.lower < self.upper):
            raise ValueError("domain requires lower < upper componentwise")

    @classmethod
    def unit(cls, d: int) -> "DomainBox":
        return cls(np.zeros(d), np.ones(d))

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def diagonal(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.lower + rng.random((n, self.dim)) * (self.upper - self.lower)


def _profile(family: str, h: np.ndarray) -> np.ndarray:
    """Per-coordinate correlation profile g(h), h >= 0 scaled distance."""
    if family == "matern32":
        t = _SQRT3 * h
        return (1.0 + t) * np.exp(-t)
    if family == "matern52":
        t = _SQRT5 * h
        return (1.0 + t + t * t / 3.0) * np.exp(-t)
    return np.exp(-0.5 * h * h)


def _profile_deriv(family: str, h: np.ndarray) -> np.ndarray:
    """dg/dh; zero at h = 0 for every family."""
    if family == "matern32":
        return -3.0 * h * np.exp(-_SQRT3 * h)
    if family == "matern52":
        return -(5.0 / 3.0) * h * (1.0 + _SQRT5 * h) * np.exp(-_SQRT5 * h)
    return -h * np.exp(-0.5 * h * h)


@dataclass(frozen=True)
class Kernel:
    """Separable stationary covariance: variance * prod_l g(|dx_l| / range_l)."""

    family: str
    variance: float
    ranges: np.ndarray

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not self.variance > 0.0:
            raise ValueError("variance must be positive")
        object.__setattr__(self, "ranges", np.atleast_1d(np.asarray(self.ranges, dtype=float)))
        if np.any(self.ranges <= 0.0):
            raise ValueError("ranges must be positive")

    @property
    def dim(self) -> int:
        return self.ranges.size

    @property
    def smooth_everywhere(self) -> bool:
        return self.family != "matern32"

    def matrix(self, x: np.ndarray, z: np.ndarray | None = None) -> np.ndarray:
        """Cross-covariance matrix between row sets x (n,d) and z (m,d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = x if z is None else np.atleast_2d(np.asarray(z, dtype=float))
        h = np.abs(x[:, None, :] - z[None, :, :]) / self.ranges
        return self.variance * np.prod(_profile(self.family, h), axis=2)

    def value(self, x, z) -> float:
        return float(self.matrix(np.atleast_2d(x), np.atleast_2d(z))[0, 0])

    def grad_x(self, x, z) -> np.ndarray:
        """Gradient of C(x, z) with respect to x; zero at coincident coordinates."""
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        diff = x - z
        h = np.abs(diff) / self.ranges
        g = _profile(self.family, h)
        gp = _profile_deriv(self.family, h)
        prod = self.variance * np.prod(g)
        out = np.empty_like(diff)
        for ell in range(diff.size):
            rest = prod / g[ell] if g[ell] > 0.0 else self.variance * np.prod(np.delete(g, ell))
            out[ell] = rest * gp[ell] * np.sign(diff[ell]) / self.ranges[ell]
        return out

    def grad_x_many(self, x, zs: np.ndarray) -> np.ndarray:
        """grad_x C(x, z_i) stacked over rows z_i; (m, d)."""
        x = np.asarray(x, dtype=float)
        zs = np.atleast_2d(np.asarray(zs, dtype=float))
        diff = x[None, :] - zs
        h = np.abs(diff) / self.ranges
        g = _profile(self.family, h)
        gp = _profile_deriv(self.family, h)
        full = self.variance * np.prod(g, axis=1)
        out = np.empty_like(diff)
        for ell in range(x.size):
            safe = g[:, ell] > 0.0
            rest = np.where(safe, full / np.where(safe, g[:, ell], 1.0),
                            self.variance * np.prod(np.delete(g, ell, axis=1), axis=1))
            out[:, ell] = rest * gp[:, ell] * np.sign(diff[:, ell]) / self.ranges[ell]
        return out


class PosteriorGP:
    """GP conditioned on noiseless observations; immutable after construction.

    An empty design (n = 0) is allowed and gives back the prior.
    """

    def __init__(self, kernel: Kernel, design, responses, mean: float = 0.0):
        design = np.asarray(design, dtype=float).reshape(-1, kernel.dim)
        responses = np.asarray(responses, dtype=float).reshape(-1)
        if design.shape[0] != responses.size:
            raise ValueError("design and responses disagree on n")
        if design.shape[0] >= 2:
            d2 = np.sum((design[:, None, :] - design[None, :, :]) ** 2, axis=2)
            np.fill_diagonal(d2, np.inf)
            if np.min(d2) <= (1e-9) ** 2:
                raise DuplicatePointError("design points closer than 1e-9")
        self.kernel = kernel
        self.mean_const = float(mean)
        self.design = design
        self.responses = responses
        if self.n:
            cmat = kernel.matrix(design)
            self._chol, self._jitter = jittered_cholesky(cmat)
            resid = responses - self.mean_const
            self._alpha = self._chol_solve(resid)
        else:
            self._chol = np.zeros((0, 0))
            self._jitter = 0.0
            self._alpha = np.zeros(0)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def dim(self) -> int:
        return self.kernel.dim

    def _chol_solve(self, b: np.ndarray) -> np.ndarray:
        z = np.linalg.solve(self._chol, b)
        return np.linalg.solve(self._chol.T, z)

    def cross_cov(self, x) -> np.ndarray:
        """c_n(x): prior covariances between x and the design points."""
        if not self.n:
            return np.zeros(0)
        return self.kernel.matrix(np.atleast_2d(x), self.design)[0]

    def mean_at(self, x) -> float:
        if not self.n:
            return self.mean_const
        return self.mean_const + float(self.cross_cov(x) @ self._alpha)

    def mean_many(self, xs) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if not self.n:
            return np.full(xs.shape[0], self.mean_const)
        return self.mean_const + self.kernel.matrix(xs, self.design) @ self._alpha

    def cov(self, xs) -> np.ndarray:
        """Posterior covariance matrix of the process at rows of xs."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        prior = self.kernel.matrix(xs)
        if not self.n:
            return prior
        cross = self.kernel.matrix(xs, self.design)
        sol = self._chol_solve(cross.T)
        post = prior - cross @ sol
        return 0.5 * (post + post.T)

    def var_at(self, x) -> float:
        return float(self.cov(np.atleast_2d(x))[0, 0])

    def sd_at(self, x) -> float:
        return math.sqrt(max(self.var_at(x), 0.0))

    def _check_smooth(self, x) -> None:
        if self.kernel.smooth_everywhere or not self.n:
            return
        d = np.min(np.linalg.norm(self.design - np.asarray(x, dtype=float), axis=1))
        if d <= 1e-12:
            raise NonSmoothPointError(
                "matern32 gradient requested at a design point")

    def mean_grad(self, x) -> np.ndarray:
        """Gradient of the posterior mean at x."""
        self._check_smooth(x)
        if not self.n:
            return np.zeros(self.dim)
        dc = self.kernel.grad_x_many(x, self.design)  # (n, d)
        return dc.T @ self._alpha

    def cov_grad(self, x, z) -> np.ndarray:
        """Gradient of C_n(x, z) with respect to x."""
        self._check_smooth(x)
        g = self.kernel.grad_x(x, z)
        if not self.n:
            return g
        dc = self.kernel.grad_x_many(x, self.design)
        w = self._chol_solve(self.cross_cov(z))
        return g - dc.T @ w

    def var_grad(self, x) -> np.ndarray:
        """Gradient of the posterior variance at x."""
        return 2.0 * self.cov_grad(x, x)

    def augment(self, x, y: float) -> "PosteriorGP":
        """New posterior with one more observation; refits from scratch."""
        x = np.asarray(x, dtype=float).reshape(1, -1)
        if self.n:
            d = np.min(np.linalg.norm(self.design - x, axis=1))
            if d <= 1e-9:
                raise DuplicatePointError("augmentation point duplicates the design")
            design = np.vstack([self.design, x])
            responses = np.append(self.responses, float(y))
        else:
            design, responses = x, np.array([float(y)])
        return PosteriorGP(self.kernel, design, responses, self.mean_const)

    def augment_many(self, xs, ys) -> "PosteriorGP":
        out = self
        for x, y in zip(np.atleast_2d(xs), np.atleast_1d(ys)):
            out = out.augment(x, float(y))
        return out


def posterior_mean(model: PosteriorGP, x) -> float:
    return model.mean_at(x)


def posterior_cov(model: PosteriorGP, xs) -> np.ndarray:
    return model.cov(xs)


def posterior_mean_grad(model: PosteriorGP, x) -> np.ndarray:
    return model.mean_grad(x)


def posterior_cov_grad(model: PosteriorGP, x, z) -> np.ndarray:
    return model.cov_grad(x, z)


def believer_augment(model: PosteriorGP, x) -> PosteriorGP:
    """Append x with its own posterior mean as a dummy response.

    Leaves the posterior mean unchanged everywhere and collapses the
    posterior variance at x.
    """
    return model.augment(x, model.mean_at(x))


def sample_path(kernel: Kernel, mean: float, points, seed: int) -> np.ndarray:
    """One joint draw of the prior at the given points; seeded."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    cmat = kernel.matrix(points)
    chol, _ = jittered_cholesky(cmat)
    rng = np.random.default_rng(seed)
    return mean + chol @ rng.standard_normal(points.shape[0])
