"""Multivariate normal density, CDF, and CDF derivatives.

All distributions are centered.  Phi_{p,G}(a) denotes P(U <= a componentwise)
for U ~ N(0, G).  The zero-dimensional CDF is 1 by convention, which keeps the
conditional reductions used by the CDF derivatives well defined down to p = 2.

CDF evaluation strategy:
  p = 0, 1   closed form,
  p = 2      deterministic Gauss-Legendre quadrature of the arcsine-substituted
             correlation integral,
  p = 3, 4   deterministic nested quadrature: Gauss-Legendre over one
             conditioning variable (chosen for stability), recursing on the
             conditional CDF, with node doubling until the requested tolerance
             is met,
  p >= 5     variable-reordered separation-of-variables integration over
             scrambled Sobol streams.  The scrambling comes from the seed in
             CdfAccuracy, so identical inputs give bitwise-identical output.

Derivatives:
  mvn_cdf_dpoint   dPhi/da_i = pdf_1(a_i) * Phi_{p-1}(conditional),
  mvn_cdf_dcov     matrix M with M_ij = d^2 Phi / da_i da_j; the differential
                   of Phi in a symmetric covariance perturbation H is
                   0.5 * trace(H @ M).  Off-diagonal entries use the bivariate
                   density times a doubly conditioned CDF; diagonal entries use
                   the recursion  M_ii = -(a_i/G_ii) dPhi/da_i
                                         - sum_{j!=i} (G_ij/G_ii) M_ij.

Every CDF evaluation, including the p = 0 base case, increments the caller's
CdfCallCounter at its dimension.  Densities are never counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import CdfToleranceError, NonSpdError

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_TINY = 1e-300
# jitter added to the diagonal (relative to mean diagonal) when a Cholesky fails
JITTER_REL = 1e-10


def jittered_cholesky(mat: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor with at most one diagonal jitter pass.

    Returns (chol, jitter_used).  Raises NonSpdError if the factorization still
    fails after jitter.
    """
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    try:
        return np.linalg.cholesky(mat), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_REL * float(np.mean(np.diag(mat)))
    if not jitter > 0.0:
        raise NonSpdError("matrix has non-positive mean diagonal")
    try:
        return np.linalg.cholesky(mat + jitter * np.eye(n)), jitter
    except np.linalg.LinAlgError:
        raise NonSpdError("matrix not SPD after one jitter pass") from None


@dataclass(frozen=True)
class SpdMatrix:
    """Symmetric positive definite matrix with a cached Cholesky factor."""

    mat: np.ndarray
    chol: np.ndarray
    jitter: float = 0.0

    @classmethod
    def from_matrix(cls, mat) -> "SpdMatrix":
        mat = np.asarray(mat, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {mat.shape}")
        n = mat.shape[0]
        if n > 0:
            scale = max(float(np.max(np.abs(mat))), 1e-300)
            if float(np.max(np.abs(mat - mat.T))) > 1e-12 * scale:
                raise NonSpdError("matrix is not symmetric to 1e-12 relative")
            if np.any(np.diag(mat) <= 0.0):
                raise NonSpdError("matrix has a non-positive diagonal entry")
        sym = 0.5 * (mat + mat.T)
        chol, jitter = jittered_cholesky(sym)
        if jitter > 0.0:
            sym = sym + jitter * np.eye(n)
        return cls(mat=sym, chol=chol, jitter=jitter)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]


@dataclass(frozen=True)
class CdfAccuracy:
    """Accuracy request for CDF integration.

    tolerance   absolute error target,
    max_evals   integrand-evaluation budget per call before giving up,
    seed        drives the quasi-randomization; same seed, same bits out.
    """

    tolerance: float = 1e-7
    max_evals: int = 8_000_000
    seed: int = 0

    def __post_init__(self):
        if not self.tolerance > 0.0:
            raise ValueError("tolerance must be positive")


class CdfCallCounter:
    """Counts CDF evaluations keyed by their dimension."""

    def __init__(self):
        self.counts: dict[int, int] = {}

    def record(self, p: int) -> None:
        self.counts[p] = self.counts.get(p, 0) + 1

    def reset(self) -> None:
        self.counts.clear()

    def snapshot(self) -> dict[int, int]:
        return dict(self.counts)

    def count(self, p: int) -> int:
        return self.counts.get(p, 0)

    def total(self) -> int:
        return sum(self.counts.values())


def _cov_matrix(cov) -> np.ndarray:
    if isinstance(cov, SpdMatrix):
        return cov.mat
    return np.asarray(cov, dtype=float)


def _as_spd(cov) -> SpdMatrix:
    if isinstance(cov, SpdMatrix):
        return cov
    return SpdMatrix.from_matrix(cov)


def norm_pdf(x: float, variance: float) -> float:
    """Univariate centered normal density with the given variance."""
    sd = math.sqrt(variance)
    return math.exp(-0.5 * (x / sd) ** 2) / (sd * _SQRT_2PI)


def mvn_pdf(x, cov) -> float:
    """Density of N(0, cov) at x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    spd = _as_spd(cov)
    p = spd.dim
    if x.size != p:
        raise ValueError(f"point has length {x.size}, covariance has dim {p}")
    if p == 0:
        return 1.0
    z = np.linalg.solve(spd.chol, x)
    logdet = 2.0 * float(np.sum(np.log(np.diag(spd.chol))))
    return float(np.exp(-0.5 * (z @ z) - 0.5 * logdet - 0.5 * p * math.log(2.0 * math.pi)))


# ---------------------------------------------------------------------------
# CDF engine
# ---------------------------------------------------------------------------

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _bvn_vec(h, k, rho: float, n_theta: int = 48):
    """Phi_2 on standardized margins, vectorized over bound arrays h, k.

    Uses the arcsine-substituted correlation integral; the integrand is
    bounded and smooth up to |rho| -> 1, where the exact degenerate limits
    take over.
    """
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    rho = min(1.0, max(-1.0, rho))
    if rho >= 1.0 - 1e-15:
        return ndtr(np.minimum(h, k))
    if rho <= -1.0 + 1e-15:
        return np.maximum(0.0, ndtr(h) + ndtr(k) - 1.0)
    theta_max = math.asin(rho)
    if abs(rho) > 0.9:
        fracs = (0.0, 0.6, 0.9, 0.99, 0.999, 0.9999, 0.99999, 1.0)
    else:
        fracs = (0.0, 0.5, 1.0)
    nodes, weights = _leggauss(n_theta)
    total = np.zeros(np.broadcast(h, k).shape)
    hh = h[..., None]
    kk = k[..., None]
    for lo_f, hi_f in zip(fracs[:-1], fracs[1:]):
        lo, hi = lo_f * theta_max, hi_f * theta_max
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        theta = mid + half * nodes
        cos2 = np.cos(theta) ** 2
        expo = -(hh * hh + kk * kk - 2.0 * hh * kk * np.sin(theta)) / (2.0 * cos2)
        total += half * (np.exp(expo) @ weights)
    val = ndtr(h) * ndtr(k) + total / (2.0 * math.pi)
    return np.clip(val, 0.0, 1.0)


def _bvn_cdf(b1: float, b2: float, rho: float) -> float:
    return float(_bvn_vec(np.float64(b1), np.float64(b2), rho))


_TAIL = 8.5  # integration cutoff; dropped normal mass < 1e-16


def _stable_condition_index(corr: np.ndarray) -> int:
    """Conditioning variable whose correlations to the rest are smallest.

    Keeps the conditional scalings sqrt(1 - r^2) away from zero; degenerate
    pairs then land inside the bivariate base case, which has exact limits.
    """
    p = corr.shape[0]
    offmax = [max(abs(corr[j, l]) for l in range(p) if l != j) for j in range(p)]
    return int(np.argmin(offmax))


def _tail_cut(tol: float) -> float:
    # truncation point: dropped mass must stay far below the tolerance, and
    # far below likely finite-difference resolutions of the result as well,
    # since the dropped mass varies smoothly with the bounds
    return min(_TAIL, max(6.5, -float(ndtri(min(0.25, 1e-8 * tol)))))


def _cdf3_block(bounds: np.ndarray, corr: np.ndarray, n: int, cut: float,
                n_theta: int = 24) -> np.ndarray:
    """Phi_3 at many bound triples (m x 3) sharing one correlation matrix."""
    idx = _stable_condition_index(corr)
    others = [j for j in range(3) if j != idx]
    r = corr[idx, others]
    s = np.sqrt(np.maximum(1.0 - r * r, 1e-24))
    rho_c = (corr[others[0], others[1]] - r[0] * r[1]) / (s[0] * s[1])
    ub = np.minimum(bounds[:, idx], cut)
    nodes, weights = _leggauss(n)
    half = 0.5 * (ub + cut)  # (ub - (-cut)) / 2
    mid = 0.5 * (ub - cut)
    t = mid[:, None] + half[:, None] * nodes[None, :]
    w = half[:, None] * weights[None, :]
    beta1 = (bounds[:, others[0], None] - t * r[0]) / s[0]
    beta2 = (bounds[:, others[1], None] - t * r[1]) / s[1]
    inner = _bvn_vec(beta1, beta2, float(rho_c), n_theta)
    dens = np.exp(-0.5 * t * t) / _SQRT_2PI
    out = np.sum(w * dens * inner, axis=1)
    out[ub <= -cut] = 0.0
    return np.clip(out, 0.0, 1.0)


def _cdf4_value(b: np.ndarray, corr: np.ndarray, n: int, cut: float) -> float:
    """Phi_4 by conditioning on one variable and recursing on Phi_3."""
    idx = _stable_condition_index(corr)
    others = [j for j in range(4) if j != idx]
    r = corr[idx, others]
    s = np.sqrt(np.maximum(1.0 - r * r, 1e-24))
    cond = corr[np.ix_(others, others)] - np.outer(r, r)
    corr3 = np.clip(cond / np.outer(s, s), -1.0, 1.0)
    np.fill_diagonal(corr3, 1.0)
    ub = min(float(b[idx]), cut)
    if ub <= -cut:
        return 0.0
    nodes, weights = _leggauss(n)
    half, mid = 0.5 * (ub + cut), 0.5 * (ub - cut)
    t = mid + half * nodes
    b3 = (b[others][None, :] - t[:, None] * r[None, :]) / s[None, :]
    inner = _cdf3_block(b3, corr3, n, cut)
    dens = np.exp(-0.5 * t * t) / _SQRT_2PI
    return float(half * np.sum(weights * dens * inner))


def _min_conditional_scale(corr: np.ndarray) -> float:
    idx = _stable_condition_index(corr)
    r = np.delete(corr[idx], idx)
    return float(np.sqrt(max(np.min(1.0 - r * r), 0.0)))


def _quad_cdf_extreme(b: np.ndarray, corr: np.ndarray, acc: CdfAccuracy) -> float:
    """Globally adaptive fallback for nearly singular correlation matrices.

    When every conditioning choice leaves a near-unit correlation, the
    conditional integrand turns into a steep sigmoid; QUADPACK subdivision
    resolves it where fixed Gauss panels cannot.  Slow, but only reached for
    batches on the edge of the duplicate-point tolerance.
    """
    from scipy.integrate import quad

    p = b.size
    idx = _stable_condition_index(corr)
    others = [j for j in range(p) if j != idx]
    r = corr[idx, others]
    s = np.sqrt(np.maximum(1.0 - r * r, 1e-28))
    cond = corr[np.ix_(others, others)] - np.outer(r, r)
    corr_red = np.clip(cond / np.outer(s, s), -1.0, 1.0)
    np.fill_diagonal(corr_red, 1.0)
    cut = _tail_cut(acc.tolerance)
    ub = min(float(b[idx]), cut)
    if ub <= -cut:
        return 0.0

    if p == 3:
        def inner(t):
            beta = (b[others] - t * r) / s
            return _bvn_cdf(beta[0], beta[1], float(corr_red[0, 1]))
    else:
        sub_acc = CdfAccuracy(tolerance=max(acc.tolerance * 0.2, 1e-11),
                              max_evals=acc.max_evals, seed=acc.seed)

        def inner(t):
            beta = (b[others] - t * r) / s
            return _quad_cdf(beta, corr_red, sub_acc)

    # bracket each sigmoid transition layer at its own width so QUADPACK's
    # error estimator cannot step over it
    pts = []
    for j in range(p - 1):
        if abs(r[j]) < 1e-12:
            continue
        center = float(b[others[j]] / r[j])
        width = float(s[j] / abs(r[j]))
        for mult in (-30.0, -10.0, -3.0, -1.0, 0.0, 1.0, 3.0, 10.0, 30.0):
            pt = center + mult * width
            if -cut + 1e-12 < pt < ub - 1e-12:
                pts.append(pt)
    pts = sorted(set(pts))

    def f(t):
        return math.exp(-0.5 * t * t) / _SQRT_2PI * inner(t)

    val, abserr = quad(f, -cut, ub, points=pts or None, limit=250,
                       epsabs=0.25 * acc.tolerance, epsrel=1e-13)
    if abserr > acc.tolerance:
        raise CdfToleranceError(acc.tolerance, abserr, val)
    return min(1.0, max(0.0, val))


def _quad_cdf(b: np.ndarray, corr: np.ndarray, acc: CdfAccuracy) -> float:
    """Adaptive deterministic quadrature for p in {3, 4}."""
    p = b.size
    # fixed panels resolve conditional sigmoids no narrower than ~0.1
    if _min_conditional_scale(corr) < 0.08:
        return _quad_cdf_extreme(b, corr, acc)
    cut = _tail_cut(acc.tolerance)
    prev = None
    err = math.inf
    val = 0.0
    for n in (40, 64, 104, 168, 272):
        if p == 3:
            val = float(_cdf3_block(b[None, :], corr, n, cut)[0])
        else:
            val = _cdf4_value(b, corr, n, cut)
        if prev is not None:
            err = abs(val - prev)
            if err <= 0.5 * acc.tolerance:
                return min(1.0, max(0.0, val))
        prev = val
    raise CdfToleranceError(acc.tolerance, err, val)


def _ordered_cholesky_upper(corr: np.ndarray, b: np.ndarray, tol: float = 1e-12):
    """Scaled, variable-reordered Cholesky factor for a one-sided problem.

    Orders variables so the smallest conditional probabilities integrate first,
    tolerating positive semidefinite input (zero pivots get zeroed columns).
    Returns (factor, bounds) ready for separation-of-variables integration.
    """
    c = corr.copy()
    b = b.copy()
    n = b.size
    y = np.zeros(n)
    for k in range(n):
        im, dem, bm = k, 2.0, 0.0
        for i in range(k, n):
            if c[i, i] > tol:
                ci = math.sqrt(c[i, i])
                s = float(c[i, :k] @ y[:k]) if k else 0.0
                t = (b[i] - s) / ci
                de = float(ndtr(t))
                if de <= dem:
                    im, dem, bm = i, de, t
        if im > k:
            c[im, im], c[k, k] = c[k, k], c[im, im]
            _swap(c, np.s_[im, :k], np.s_[k, :k])
            _swap(c, np.s_[im + 1:, im], np.s_[im + 1:, k])
            _swap(c, np.s_[k + 1:im, k], np.s_[im, k + 1:im])
            _swap(b, k, im)
        ckk = c[k, k]
        if ckk > (k + 1) * tol:
            ck = math.sqrt(ckk)
            c[k, k] = ck
            c[k, k + 1:] = 0.0
            for i in range(k + 1, n):
                c[i, k] /= ck
                c[i, k + 1:i + 1] -= c[i, k] * c[k + 1:i + 1, k]
            if dem > tol:
                y[k] = -math.exp(-0.5 * bm * bm) / (_SQRT_2PI * dem)
            else:
                y[k] = bm
            c[k, :k + 1] /= ck
            b[k] /= ck
        else:
            c[k:, k] = 0.0
            s = float(c[k, :k] @ y[:k]) if k else 0.0
            y[k] = b[k] - s
    return c, b


def _swap(x, s1, s2):
    t = np.copy(x[s1])
    x[s1] = x[s2]
    x[s2] = t


def _sov_values(chol: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Separation-of-variables integrand on points x in [0,1]^(p-1 x N)."""
    n = b.size
    nsamp = x.shape[1]
    e_prev = np.full(nsamp, float(ndtr(b[0])) if chol[0, 0] > _TINY else float(b[0] >= 0.0))
    pv = e_prev.copy()
    y = np.empty((n - 1, nsamp))
    for i in range(1, n):
        z = np.clip(x[i - 1] * e_prev, 1e-310, 1.0 - 1e-16)
        y[i - 1] = ndtri(z)
        s = chol[i, :i] @ y[:i]
        t = b[i] - s
        if chol[i, i] > _TINY:
            e_i = ndtr(t)
        else:
            e_i = (t >= 0.0).astype(float)
        pv = pv * e_i
        e_prev = e_i
    return pv


def _qmc_cdf(b: np.ndarray, corr: np.ndarray, acc: CdfAccuracy) -> float:
    """Seeded quasi-randomized CDF for p >= 5 (standardized input).

    Integrates the reordered separation-of-variables form over independently
    scrambled Sobol streams; the spread across streams gives the error
    estimate (3 standard errors), and sample counts double until the estimate
    meets the tolerance.
    """
    from scipy.stats import qmc

    chol, bs = _ordered_cholesky_upper(corr, b)
    p = b.size
    rng = np.random.default_rng(acc.seed)
    nshift = 8
    log2n = 10
    num = 0.0
    wsum = 0.0
    used = 0
    while True:
        means = np.empty(nshift)
        for j in range(nshift):
            sob = qmc.Sobol(d=p - 1, scramble=True, seed=rng)
            x = sob.random_base2(log2n)
            means[j] = float(np.mean(_sov_values(chol, bs, x.T)))
        est = float(np.mean(means))
        err = 3.0 * float(np.std(means, ddof=1)) / math.sqrt(nshift)
        used += (1 << log2n) * nshift
        w = 1.0 / max(err, 1e-16) ** 2
        num += w * est
        wsum += w
        value = num / wsum
        combined = math.sqrt(1.0 / wsum)
        if combined <= acc.tolerance:
            return min(1.0, max(0.0, value))
        if used >= acc.max_evals:
            raise CdfToleranceError(acc.tolerance, combined, value)
        log2n += 1


def mvn_cdf(a, cov, acc: CdfAccuracy | None = None, counter: CdfCallCounter | None = None) -> float:
    """P(U <= a componentwise) for U ~ N(0, cov).

    Dispatches on dimension as described in the module docstring.  Counts one
    evaluation at dimension p on the counter.  Coordinates whose variance is
    numerically zero are resolved exactly (step function) before integration.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    mat = _cov_matrix(cov)
    p = a.size
    if mat.shape != (p, p):
        raise ValueError(f"bounds have length {p}, covariance has shape {mat.shape}")
    if counter is not None:
        counter.record(p)
    if acc is None:
        acc = CdfAccuracy()
    if p == 0:
        return 1.0
    var = np.diag(mat).copy()
    scale = max(float(np.max(var)), 0.0)
    keep = var > max(scale, 1.0) * 1e-14
    if not np.all(keep):
        # deterministic coordinates contribute a step factor
        if np.any(a[~keep] < 0.0):
            return 0.0
        a = a[keep]
        mat = mat[np.ix_(keep, keep)]
        var = var[keep]
        p = a.size
        if p == 0:
            return 1.0
    sd = np.sqrt(var)
    b = a / sd
    if p == 1:
        return float(ndtr(b[0]))
    corr = mat / np.outer(sd, sd)
    corr = np.clip(corr, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    if p == 2:
        return _bvn_cdf(float(b[0]), float(b[1]), float(corr[0, 1]))
    if p <= 4:
        return _quad_cdf(b, corr, acc)
    return _qmc_cdf(b, corr, acc)


# ---------------------------------------------------------------------------
# Conditional reduction and CDF derivatives
# ---------------------------------------------------------------------------

def conditional_reduce(a, cov, i: int) -> tuple[np.ndarray, SpdMatrix]:
    """Moments of (U_{-i} | U_i = a_i) recast as a one-dimension-smaller CDF problem.

    Returns (a_red, cov_red) with
        a_red  = a_{-i} - (a_i / G_ii) G_{-i,i}
        G_red  = G_{-i,-i} - G_{-i,i} G_{-i,i}^T / G_ii
    so that Phi_{p,G}(a) factorizes through pdf_1(a_i) * Phi_{p-1,G_red}(a_red).
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    mat = _cov_matrix(cov)
    p = a.size
    if not 0 <= i < p:
        raise ValueError(f"index {i} out of range for dimension {p}")
    gii = mat[i, i]
    if gii <= _TINY:
        raise NonSpdError(f"conditioning variance {gii!r} below jitter floor")
    mask = np.arange(p) != i
    gcol = mat[mask, i]
    a_red = a[mask] - (a[i] / gii) * gcol
    g_red = mat[np.ix_(mask, mask)] - np.outer(gcol, gcol) / gii
    try:
        return a_red, SpdMatrix.from_matrix(g_red)
    except NonSpdError:
        return a_red, _loose_spd(g_red)


def spd_from_covariance(mat, scale: float | None = None) -> SpdMatrix:
    """SpdMatrix from a numerically computed covariance.

    Unlike the strict constructor, collapsed diagonal entries (interpolated
    points, conditioned-out coordinates) are floored and their cross terms
    zeroed, which is exact up to roundoff by Cauchy-Schwarz.  `scale` sets
    the natural variance scale of the problem (for posterior matrices, the
    prior variance): cancellation error lives at that scale, not at the
    possibly collapsed diagonal's.
    """
    return _loose_spd(np.asarray(mat, dtype=float), scale)


def _loose_spd(mat: np.ndarray, scale: float | None = None) -> SpdMatrix:
    # reductions of barely-SPD parents can push a diagonal entry to ~0;
    # floor it so downstream code sees the degenerate coordinate explicitly
    mat = 0.5 * (mat + mat.T)
    n = mat.shape[0]
    if n == 0:
        return SpdMatrix(mat=mat, chol=np.zeros((0, 0)), jitter=0.0)
    if scale is None:
        scale = max(float(np.max(np.abs(np.diag(mat)))), 1e-12)
    floor = JITTER_REL * scale
    d = np.diag(mat).copy()
    bad = d <= floor
    if np.any(bad):
        mat = mat.copy()
        for j in np.where(bad)[0]:
            mat[j, :] = 0.0
            mat[:, j] = 0.0
            mat[j, j] = floor
    try:
        return SpdMatrix(mat=mat, chol=np.linalg.cholesky(mat), jitter=0.0)
    except np.linalg.LinAlgError:
        pass
    mat = mat + floor * np.eye(n)
    try:
        return SpdMatrix(mat=mat, chol=np.linalg.cholesky(mat), jitter=floor)
    except np.linalg.LinAlgError:
        raise NonSpdError("covariance not SPD after one scaled jitter pass") from None


def mvn_cdf_dpoint(a, cov, i: int, acc: CdfAccuracy | None = None,
                   counter: CdfCallCounter | None = None) -> float:
    """dPhi_{p,G}/da_i = pdf_1(a_i; G_ii) * Phi_{p-1}(conditional reduction).

    Makes exactly one CDF call, at dimension p-1.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    mat = _cov_matrix(cov)
    a_red, cov_red = conditional_reduce(a, mat, i)
    return norm_pdf(float(a[i]), float(mat[i, i])) * mvn_cdf(a_red, cov_red, acc, counter)


def mvn_cdf_dcov(a, cov, acc: CdfAccuracy | None = None,
                 counter: CdfCallCounter | None = None) -> np.ndarray:
    """Second point-derivative matrix M_ij = d^2 Phi / da_i da_j.

    The covariance differential of Phi under a symmetric perturbation H is
    0.5 * trace(H @ M).  Off-diagonals apply conditional_reduce twice; each
    diagonal entry uses the recursion over its row, with the first derivative
    computed by mvn_cdf_dpoint.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    mat = _cov_matrix(cov)
    p = a.size
    m = np.zeros((p, p))
    for i in range(p):
        for j in range(i + 1, p):
            pair = np.ix_([i, j], [i, j])
            dens = mvn_pdf(a[[i, j]], mat[pair])
            a1, c1 = conditional_reduce(a, mat, j)
            a2, c2 = conditional_reduce(a1, c1, i)
            val = dens * mvn_cdf(a2, c2, acc, counter)
            m[i, j] = val
            m[j, i] = val
    for i in range(p):
        gii = mat[i, i]
        d_i = mvn_cdf_dpoint(a, mat, i, acc, counter)
        off = sum(mat[i, j] / gii * m[i, j] for j in range(p) if j != i)
        m[i, i] = -(a[i] / gii) * d_i - off
    return m
