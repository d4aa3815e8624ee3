"""Closed-form multipoint expected improvement and its analytic gradient.

For a batch X of q points with posterior moments (m, S) and threshold T, the
criterion is

    EI(X) = sum_k [ (m_k - T) * Phi_q(-m^(k); S^(k))
                    + sum_i S^(k)_{ik} * pdf(m^(k)_i; S^(k)_ii)
                            * Phi_{q-1}(-m^(k)_{|i}; S^(k)_{|i}) ]

where (m^(k), S^(k)) are the moments of Z^(k) = L^(k) Y + T e_k with

    Z^(k)_j = Y_j - Y_k   (j != k),      Z^(k)_k = T - Y_k,

so that {Z^(k) <= 0} is exactly the event that point k exceeds the threshold
and is the batch argmax; the (k, i) pair is reduced by conditioning Z^(k)_i
to zero.

The gradient chains, per (k, i): the spatial gradients of the posterior
moments, the sign-flip linear map, the derivative of the univariate density
in its mean and variance, the differential of the conditional reduction, and
the point/covariance derivatives of both CDFs.  It is assembled in adjoint
form: coefficients with respect to (m, S) are accumulated over all (k, i)
pairs first and pulled back through the posterior-moment gradients once.

Evaluation cost is dominated by CDF calls: the value makes q calls at
dimension q and q^2 at dimension q-1; the gradient additionally differentiates
each CDF through mvn_cdf_dpoint and mvn_cdf_dcov.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DuplicatePointError
from .gp import DomainBox, PosteriorGP
from .mvn import (CdfAccuracy, CdfCallCounter, SpdMatrix, conditional_reduce,
                  mvn_cdf, mvn_cdf_dcov, mvn_cdf_dpoint, norm_pdf,
                  spd_from_covariance)

# rows closer than this fraction of the domain diagonal are duplicates
DEDUP_REL_TOL = 1e-7


@dataclass(frozen=True)
class Batch:
    """Ordered set of q candidate points inside a box domain."""

    points: np.ndarray
    domain: DomainBox

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        if pts.shape[0] < 1:
            raise ValueError("batch needs at least one point")
        if pts.shape[1] != self.domain.dim:
            raise ValueError("batch dimension disagrees with the domain")
        if not all(self.domain.contains(row, tol=1e-12) for row in pts):
            raise ValueError("batch rows must lie within the domain")

    @property
    def q(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def _dup_tol(self) -> float:
        return DEDUP_REL_TOL * self.domain.diagonal()

    def min_row_gap(self) -> float:
        if self.q < 2:
            return math.inf
        d2 = np.sum((self.points[:, None, :] - self.points[None, :, :]) ** 2, axis=2)
        np.fill_diagonal(d2, np.inf)
        return float(math.sqrt(np.min(d2)))

    def dedup(self) -> "Batch":
        """Collapse near-duplicate rows; the max over the batch is unchanged."""
        tol = self._dup_tol()
        keep: list[int] = []
        for j in range(self.q):
            if all(np.linalg.norm(self.points[j] - self.points[i]) > tol for i in keep):
                keep.append(j)
        if len(keep) == self.q:
            return self
        return Batch(self.points[keep], self.domain)

    def require_distinct(self) -> None:
        if self.min_row_gap() <= self._dup_tol():
            raise DuplicatePointError(
                "batch rows closer than the dedup tolerance; gradient undefined")


@dataclass(frozen=True)
class MomentPair:
    """Posterior mean/covariance of the batch responses plus the threshold."""

    m: np.ndarray
    sigma: SpdMatrix
    threshold: float
    scale: float = 1.0  # prior variance; sets the covariance jitter floor


@dataclass(frozen=True)
class AffineView:
    """Moments of Z^(k): coordinate k maps to T - Y_k, the rest to Y_j - Y_k."""

    k: int
    m: np.ndarray
    sigma: SpdMatrix
    lmap: np.ndarray


@dataclass(frozen=True)
class ConditionalView:
    """Moments of Z^(k)_{-i} given Z^(k)_i = 0."""

    k: int
    i: int
    m: np.ndarray
    sigma: SpdMatrix


@dataclass(frozen=True)
class QeiGradient:
    value: float
    gradient: np.ndarray
    cdf_calls: dict[int, int]


def moments(model: PosteriorGP, batch: Batch, threshold: float) -> MomentPair:
    m = model.mean_many(batch.points)
    sigma = spd_from_covariance(model.cov(batch.points),
                                scale=model.kernel.variance)
    return MomentPair(m=m, sigma=sigma, threshold=float(threshold),
                      scale=model.kernel.variance)


def running_max_threshold(model: PosteriorGP) -> float:
    """Default threshold: best observed response."""
    if not model.n:
        raise ValueError("threshold from observations needs at least one point")
    return float(np.max(model.responses))


def affine_view(mp: MomentPair, k: int) -> AffineView:
    q = mp.m.size
    lmap = np.eye(q)
    lmap[:, k] = -1.0
    mk = lmap @ mp.m
    mk[k] += mp.threshold
    sk = lmap @ mp.sigma.mat @ lmap.T
    return AffineView(k=k, m=mk, sigma=spd_from_covariance(sk, scale=mp.scale),
                      lmap=lmap)


def conditional_view(av: AffineView, i: int) -> ConditionalView:
    m_red, sig_red = conditional_reduce(av.m, av.sigma.mat, i)
    return ConditionalView(k=av.k, i=i, m=m_red, sigma=sig_red)


def qei_value(model: PosteriorGP, batch: Batch, threshold: float,
              acc: CdfAccuracy | None = None,
              counter: CdfCallCounter | None = None) -> float:
    """Expected positive excess of the batch maximum over the threshold.

    Near-duplicate rows are collapsed first (the maximum is unaffected).
    """
    batch = batch.dedup()
    mp = moments(model, batch, threshold)
    q = batch.q
    total = 0.0
    for k in range(q):
        av = affine_view(mp, k)
        p_k = mvn_cdf(-av.m, av.sigma, acc, counter)
        total += (mp.m[k] - threshold) * p_k
        for i in range(q):
            cv = conditional_view(av, i)
            f_ki = mvn_cdf(-cv.m, cv.sigma, acc, counter)
            dens = norm_pdf(float(av.m[i]), float(av.sigma.mat[i, i]))
            total += av.sigma.mat[i, k] * dens * f_ki
    return float(total)


def mc_qei(model: PosteriorGP, batch: Batch, threshold: float,
           nsamples: int, seed: int) -> tuple[float, float]:
    """Monte-Carlo estimate of the criterion with its standard error."""
    if nsamples < 1000:
        raise ValueError("use at least 10^3 samples")
    mp = moments(model, batch, threshold)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((nsamples, batch.q))
    draws = mp.m + z @ mp.sigma.chol.T
    imp = np.maximum(draws.max(axis=1) - threshold, 0.0)
    est = float(np.mean(imp))
    se = float(np.std(imp, ddof=1) / math.sqrt(nsamples))
    return est, se


def qei_grad(model: PosteriorGP, batch: Batch, threshold: float,
             acc: CdfAccuracy | None = None,
             counter: CdfCallCounter | None = None) -> QeiGradient:
    """Criterion value and its gradient with respect to the q x d batch.

    Refuses batches with near-duplicate rows: the value would still be defined
    on the collapsed batch, the gradient would not.
    """
    batch.require_distinct()
    own_counter = counter if counter is not None else CdfCallCounter()
    mp = moments(model, batch, threshold)
    q, d = batch.q, batch.dim
    m, tt = mp.m, mp.threshold

    # adjoint accumulators: d(EI) = gm . dm + sum_rt gs[r,t] dS_rt
    gm = np.zeros(q)
    gs = np.zeros((q, q))
    value = 0.0

    for k in range(q):
        av = affine_view(mp, k)
        p_k = mvn_cdf(-av.m, av.sigma, acc, own_counter)
        grad_p = np.array([mvn_cdf_dpoint(-av.m, av.sigma, j, acc, own_counter)
                           for j in range(q)])
        hess_p = mvn_cdf_dcov(-av.m, av.sigma, acc, own_counter)

        value += (m[k] - tt) * p_k
        gm[k] += p_k
        # local adjoints in (m^(k), S^(k)) coordinates
        u = (m[k] - tt) * (-grad_p)
        umat = (m[k] - tt) * 0.5 * hess_p.copy()

        for i in range(q):
            cv = conditional_view(av, i)
            f_ki = mvn_cdf(-cv.m, cv.sigma, acc, own_counter)
            grad_f = np.array([mvn_cdf_dpoint(-cv.m, cv.sigma, r, acc, own_counter)
                               for r in range(q - 1)])
            hess_f = mvn_cdf_dcov(-cv.m, cv.sigma, acc, own_counter)

            gamma = float(av.sigma.mat[i, i])
            sig_col = np.delete(av.sigma.mat[:, i], i)  # S^(k)_{-i,i}
            x_i = float(av.m[i])
            c_ki = float(av.sigma.mat[i, k])
            dens = norm_pdf(x_i, gamma)
            value += c_ki * dens * f_ki

            others = [j for j in range(q) if j != i]

            # d c_ki term
            umat[i, k] += dens * f_ki

            # c * d(pdf) * F: density differentiated in mean and variance
            coeff = c_ki * f_ki * dens
            u[i] += coeff * (-x_i / gamma)
            umat[i, i] += coeff * 0.5 * (x_i * x_i / gamma ** 2 - 1.0 / gamma)

            # c * pdf * dF through the conditional-reduction differential
            cf = c_ki * dens
            gdotsig = float(grad_f @ sig_col)
            u[others] += cf * (-grad_f)
            u[i] += cf * (gdotsig / gamma)
            umat[i, i] += cf * (-gdotsig) * x_i / gamma ** 2
            hsig = hess_f @ sig_col
            for idx, j in enumerate(others):
                umat[j, i] += cf * (x_i / gamma * grad_f[idx] - hsig[idx] / gamma)
            umat[np.ix_(others, others)] += cf * 0.5 * hess_f
            umat[i, i] += cf * 0.5 * float(sig_col @ hsig) / gamma ** 2

        # pull back through m^(k) = L m + T e_k, S^(k) = L S L^T
        gm += av.lmap.T @ u
        gs += av.lmap.T @ umat @ av.lmap

    # pull the (m, S) adjoints back through the posterior-moment gradients
    grad = np.zeros((q, d))
    gs_sym = gs + gs.T
    for j in range(q):
        grad[j] += gm[j] * model.mean_grad(batch.points[j])
        for t in range(q):
            if gs_sym[j, t] != 0.0:
                grad[j] += gs_sym[j, t] * model.cov_grad(batch.points[j], batch.points[t])
    return QeiGradient(value=float(value), gradient=grad,
                       cdf_calls=own_counter.snapshot())


def qei_grad_fd(model: PosteriorGP, batch: Batch, threshold: float,
                acc: CdfAccuracy | None = None, step: float = 1e-5,
                counter: CdfCallCounter | None = None) -> np.ndarray:
    """Central finite differences of qei_value; the independent gradient oracle."""
    q, d = batch.q, batch.dim
    out = np.zeros((q, d))
    for j in range(q):
        for ell in range(d):
            plus = batch.points.copy()
            minus = batch.points.copy()
            plus[j, ell] += step
            minus[j, ell] -= step
            f_plus = qei_value(model, Batch(plus, batch.domain), threshold, acc, counter)
            f_minus = qei_value(model, Batch(minus, batch.domain), threshold, acc, counter)
            out[j, ell] = (f_plus - f_minus) / (2.0 * step)
    return out
