"""Deterministic numerical kernels used by both search phases."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg, special
from scipy.interpolate import BSpline
from scipy.stats import rankdata

from .core import Bounds, DegenerateStatisticError

log = logging.getLogger(__name__)

MAD_SCALE = 1.4826
RIDGE_STEPS = (1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2)


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky factorization failed even after the largest ridge."""


def cholesky_ridge(v):
    """Lower Cholesky factor of symmetric ``v`` with ridge escalation.

    Returns ``(L, ridge)`` where ``ridge`` is the relative ridge that was
    needed (0.0 if none).
    """
    v = np.asarray(v, dtype=float)
    v = 0.5 * (v + v.T)
    try:
        return linalg.cholesky(v, lower=True, check_finite=False), 0.0
    except linalg.LinAlgError:
        pass
    if not np.all(np.isfinite(v)):
        raise NotPositiveDefiniteError("matrix has non-finite entries")
    n = v.shape[0]
    scale = np.trace(v) / n
    if not scale > 0:
        scale = 1.0
    eye = np.eye(n)
    for eps in RIDGE_STEPS:
        try:
            chol = linalg.cholesky(v + eps * scale * eye, lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
        log.debug("cholesky needed ridge %g", eps)
        return chol, eps
    raise NotPositiveDefiniteError("matrix is not positive definite even with ridge 1e-2")


def spd_solve(v, rhs, return_ridge=False):
    """Solve ``v @ X = rhs`` for symmetric ``v`` through a Cholesky factor."""
    chol, ridge = cholesky_ridge(v)
    x = linalg.cho_solve((chol, True), np.asarray(rhs, dtype=float), check_finite=False)
    return (x, ridge) if return_ridge else x


def mahalanobis_sq(x, v):
    """``x' v^{-1} x`` via a triangular solve. ``x`` may be (q,) or (n, q)."""
    chol, _ = cholesky_ridge(v)
    x = np.asarray(x, dtype=float)
    z = linalg.solve_triangular(chol, x.T, lower=True, check_finite=False)
    return np.sum(z * z, axis=0)


def whitener(v):
    """Return ``W`` with ``W @ x`` having identity covariance when ``x ~ v``."""
    chol, _ = cholesky_ridge(v)
    return linalg.solve_triangular(chol, np.eye(chol.shape[0]), lower=True, check_finite=False)


@dataclass
class RobustScatter:
    sigma: np.ndarray
    mads: np.ndarray
    rank_corr: np.ndarray


def normal_scores(x):
    """Column-wise Gaussian scores ``Phi^{-1}(rank / (n + 1))`` with mid-ranks."""
    x = np.asarray(x, dtype=float)
    ranks = rankdata(x, method="average", axis=0)
    return special.ndtri(ranks / (x.shape[0] + 1))


def robust_scatter(residuals) -> RobustScatter:
    """MAD scales combined with the Gaussian-rank correlation matrix."""
    r = np.asarray(residuals, dtype=float)
    if r.ndim != 2 or r.shape[0] < 3:
        raise ValueError("robust_scatter needs an (N, q) matrix with N >= 3")
    med = np.median(r, axis=0)
    mads = MAD_SCALE * np.median(np.abs(r - med), axis=0)
    zero = np.flatnonzero(~(mads > 0))
    if zero.size:
        raise DegenerateStatisticError(zero[0])
    q = r.shape[1]
    if q == 1:
        corr = np.ones((1, 1))
    else:
        z = normal_scores(r)
        corr = np.corrcoef(z, rowvar=False)
        # ndtri scores of a constant column cannot occur (MAD>0), but guard NaN anyway
        corr = np.nan_to_num(corr, nan=0.0)
        np.fill_diagonal(corr, 1.0)
        w, vec = np.linalg.eigh(corr)
        if w.min() < 1e-8:
            w = np.maximum(w, 1e-8)
            corr = (vec * w) @ vec.T
            d = np.sqrt(np.diag(corr))
            corr = corr / np.outer(d, d)
        corr = 0.5 * (corr + corr.T)
        np.fill_diagonal(corr, 1.0)
    sigma = corr * np.outer(mads, mads)
    return RobustScatter(sigma=sigma, mads=mads, rank_corr=corr)


@dataclass
class LocalLinearFit:
    tau: np.ndarray
    jac: np.ndarray
    err_cov: np.ndarray
    tau_cov: np.ndarray


def mv_least_squares(thetas, stats, center) -> LocalLinearFit:
    """Regress ``stats`` on ``[1, thetas - center]`` by least squares.

    ``err_cov`` divides the residual cross-product by ``L - p - 1``;
    ``tau_cov`` is the covariance of the intercept estimate.
    """
    thetas = np.asarray(thetas, dtype=float)
    stats = np.asarray(stats, dtype=float)
    n, p = thetas.shape
    if n <= p + 1:
        raise ValueError(f"need more than p+1={p + 1} points for the local regression (got {n})")
    x = np.empty((n, p + 1))
    x[:, 0] = 1.0
    x[:, 1:] = thetas - np.asarray(center, dtype=float)
    xtx = x.T @ x
    coef = spd_solve(xtx, x.T @ stats)
    resid = stats - x @ coef
    err_cov = resid.T @ resid / (n - p - 1)
    c00 = spd_solve(xtx, np.eye(p + 1)[:, 0])[0]
    return LocalLinearFit(
        tau=coef[0].copy(),
        jac=coef[1:].T.copy(),
        err_cov=err_cov,
        tau_cov=c00 * err_cov,
    )


# -- l1 trust-region step ---------------------------------------------------

def bounded_simplex(c, a, b, upper, basis, at_upper=None, tol=1e-11, max_iter=10000):
    """Minimize ``c'x`` s.t. ``a x = b``, ``0 <= x <= upper``.

    Dense bounded-variable primal simplex with Bland's rule. ``basis`` must
    index a feasible starting basis (nonbasic variables at the bounds given
    by ``at_upper``). Returns ``x``.
    """
    c = np.asarray(c, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    upper = np.asarray(upper, dtype=float)
    m, n = a.shape
    basis = list(basis)
    at_upper = np.zeros(n, dtype=bool) if at_upper is None else np.asarray(at_upper, dtype=bool).copy()

    for _ in range(max_iter):
        bmat = a[:, basis]
        nonbasic = np.ones(n, dtype=bool)
        nonbasic[basis] = False
        xn = np.where(nonbasic & at_upper, upper, 0.0)
        xb = np.linalg.solve(bmat, b - a @ xn)
        y = np.linalg.solve(bmat.T, c[basis])
        d = c - a.T @ y
        entering = -1
        for j in range(n):
            if not nonbasic[j]:
                continue
            if (not at_upper[j] and d[j] < -tol) or (at_upper[j] and d[j] > tol):
                entering = j
                break
        if entering < 0:
            x = xn
            x[basis] = xb
            return x
        sign = 1.0 if not at_upper[entering] else -1.0
        col = np.linalg.solve(bmat, a[:, entering])
        # x_B(t) = xb - sign * t * col
        step = upper[entering]
        leave_pos = -1
        leave_to_upper = False
        for i in range(m):
            rate = sign * col[i]
            bi = basis[i]
            if rate > tol:
                t = max(xb[i], 0.0) / rate
                to_up = False
            elif rate < -tol and np.isfinite(upper[bi]):
                t = max(upper[bi] - xb[i], 0.0) / -rate
                to_up = True
            else:
                continue
            if t < step - 1e-15 or (leave_pos >= 0 and abs(t - step) <= 1e-15 and bi < basis[leave_pos]):
                step, leave_pos, leave_to_upper = t, i, to_up
        if not np.isfinite(step):
            raise RuntimeError("LP is unbounded")
        if leave_pos < 0:
            at_upper[entering] = not at_upper[entering]
            continue
        leaving = basis[leave_pos]
        at_upper[leaving] = leave_to_upper
        at_upper[entering] = False
        basis[leave_pos] = entering
    raise RuntimeError("simplex iteration limit reached")


def trust_box(theta, bounds: Bounds, rho):
    """Lower/upper limits on the step: stay in the box and within the per-coordinate cap."""
    theta = np.asarray(theta, dtype=float)
    cap = np.maximum(1.0, np.abs(theta)) * rho
    lo = np.maximum(bounds.lower - theta, -cap)
    hi = np.minimum(bounds.upper - theta, cap)
    return lo, np.maximum(hi, lo)


def l1_trust_step(omega, g, theta, bounds: Bounds, rho):
    """Step ``delta`` minimizing ``|omega delta - g|_1`` inside the trust box."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    omega = np.asarray(omega, dtype=float)
    g = np.asarray(g, dtype=float)
    p = g.size
    lo, hi = trust_box(theta, bounds, rho)
    width = hi - lo
    # delta = lo + x;  omega x - r_plus + r_minus = g - omega lo
    rhs = g - omega @ lo
    a = np.hstack([omega, -np.eye(p), np.eye(p)])
    cost = np.concatenate([np.zeros(p), np.ones(2 * p)])
    upper = np.concatenate([width, np.full(2 * p, np.inf)])
    basis = [2 * p + i if rhs[i] >= 0 else p + i for i in range(p)]
    b = rhs.copy()
    x = bounded_simplex(cost, a, b, upper, basis)
    delta = lo + np.clip(x[:p], 0.0, width)
    return np.clip(delta, lo, hi)


# -- scalar helpers -----------------------------------------------------------

def chisq_sf(x, df):
    """Chi-square survival function via the regularized upper incomplete gamma."""
    if df <= 0:
        raise ValueError("df must be positive")
    x = float(x)
    if x <= 0:
        return 1.0
    return float(special.gammaincc(0.5 * df, 0.5 * x))


def quantile(sample, ps):
    """Type-7 quantiles (linear interpolation, ``h = (n - 1) p + 1``)."""
    sample = np.asarray(sample, dtype=float)
    if sample.size == 0:
        raise ValueError("quantile of an empty sample")
    return np.quantile(sample, ps, method="linear")


def gini(abundances):
    """Gini index ``sum_ij |a_i - a_j| / (2 m sum(a))``."""
    a = np.sort(np.asarray(abundances, dtype=float))
    total = a.sum()
    if not total > 0:
        raise ValueError("gini needs a positive total abundance")
    m = a.size
    # sum_{i<j} (a_j - a_i) with a sorted, doubled for the full double sum
    i = np.arange(1, m + 1)
    pair_sum = 2.0 * np.sum((2 * i - m - 1) * a)
    return float(pair_sum / (2.0 * m * total))


def clamped_knots(degree=2, interior_knots=(0.2,), domain=(0.0, 1.0)):
    lo, hi = domain
    return np.concatenate([[lo] * (degree + 1), list(interior_knots), [hi] * (degree + 1)])


def bspline_basis(times, degree=2, interior_knots=(0.2,), domain=(0.0, 1.0)):
    """Dense B-spline design matrix on a clamped knot vector."""
    knots = clamped_knots(degree, interior_knots, domain)
    times = np.asarray(times, dtype=float)
    return BSpline.design_matrix(times, knots, degree).toarray()


def bspline_ls(times, values, degree=2, interior_knots=(0.2,), domain=(0.0, 1.0)):
    """Least-squares spline coefficients of ``values`` observed at ``times``."""
    basis = bspline_basis(times, degree, interior_knots, domain)
    if basis.shape[0] < basis.shape[1]:
        raise ValueError("need at least as many observation times as basis functions")
    values = np.asarray(values, dtype=float)
    return spd_solve(basis.T @ basis, basis.T @ values)
