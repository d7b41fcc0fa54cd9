"""Local search: trust-region quasi-Fisher scoring on local linear fits."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import Bounds, Config, FitResult, NonConvergenceError, SimArchive, TraceRecord
from .diagnostics import diagnose
from .global_search import GlobalState
from .mathkit import (
    NotPositiveDefiniteError,
    cholesky_ridge,
    l1_trust_step,
    mahalanobis_sq,
    mv_least_squares,
    spd_solve,
)
from .sampling import LOCAL_PROPOSAL, ellipsoid_box_uniform

log = logging.getLogger(__name__)


@dataclass
class LocalState:
    theta_hat: np.ndarray
    rho: float
    fit_size: int
    theta_tilde: np.ndarray | None = None
    tau: np.ndarray | None = None
    jac_smooth: np.ndarray | None = None
    sigma_smooth: np.ndarray | None = None
    g_hat: np.ndarray | None = None
    omega_hat: np.ndarray | None = None
    tau_cov: np.ndarray | None = None
    u_mat: np.ndarray | None = None
    g_norm: float = np.inf
    accepted: bool | None = None
    iter: int = 0
    trace: list[TraceRecord] = field(default_factory=list)


def init_local(global_state: GlobalState, cfg: Config) -> LocalState:
    """Start from the archive point whose bridge estimate is closest to the data."""
    best = int(np.argmin(global_state.distances))  # first index on ties
    return LocalState(
        theta_hat=global_state.archive.thetas[best].copy(),
        rho=cfg.rho_max / 10.0,
        fit_size=cfg.n_elite,
    )


def nearest(thetas, center, scale, size):
    """Indices of the ``size`` rows nearest to ``center``; ties go to lower indices."""
    d2 = np.sum(((thetas - center) / scale) ** 2, axis=1)
    return np.argsort(d2, kind="stable")[:size]


def local_fit_update(state: LocalState, archive: SimArchive, cfg: Config) -> LocalState:
    scale = np.maximum(1.0, np.abs(state.theta_hat))  # sqrt of diag(max(1, theta^2))
    idx = nearest(archive.thetas, state.theta_hat, scale, state.fit_size)
    fit = mv_least_squares(archive.thetas[idx], archive.stats[idx], state.theta_hat)
    if state.fit_size == cfg.n_elite or state.jac_smooth is None:
        state.jac_smooth = fit.jac
        state.sigma_smooth = fit.err_cov
    else:
        lam = cfg.lambda_
        state.jac_smooth = (1.0 - lam) * state.jac_smooth + lam * fit.jac
        state.sigma_smooth = (1.0 - lam) * state.sigma_smooth + lam * fit.err_cov
    state.tau = fit.tau
    state.tau_cov = fit.tau_cov
    jac = state.jac_smooth
    resid = archive.observed - fit.tau
    # one factorization of sigma for all three products
    sj = spd_solve(state.sigma_smooth, np.column_stack([jac, resid]))
    sinv_j, sinv_r = sj[:, :-1], sj[:, -1]
    state.g_hat = jac.T @ sinv_r
    omega = jac.T @ sinv_j
    state.omega_hat = 0.5 * (omega + omega.T)
    u = sinv_j.T @ fit.tau_cov @ sinv_j
    state.u_mat = 0.5 * (u + u.T)
    return state


def propose_candidate(state: LocalState, bounds: Bounds) -> np.ndarray:
    delta = l1_trust_step(state.omega_hat, state.g_hat, state.theta_hat, bounds, state.rho)
    state.theta_tilde = bounds.clip(state.theta_hat + delta)
    return state.theta_tilde


def score_norm(state: LocalState) -> float:
    """``g' U^{-1} g``; infinite when U cannot be factorized."""
    try:
        return float(mahalanobis_sq(state.g_hat, state.u_mat))
    except NotPositiveDefiniteError:
        log.warning("dispersion of the estimating function is singular; not converged")
        return np.inf


def local_converged(state: LocalState, cfg: Config) -> bool:
    if state.fit_size != cfg.nfit_local:
        return False
    p = state.g_hat.size
    return bool(score_norm(state) < p * cfg.tol_local)


def model_check_stat(state: LocalState, new_thetas, new_stats, cfg: Config) -> float:
    center = state.theta_tilde if cfg.model_check_center == "candidate" else state.theta_hat
    pred = state.tau + (np.asarray(new_thetas) - center) @ state.jac_smooth.T
    return float(np.sum(mahalanobis_sq(np.asarray(new_stats) - pred, state.sigma_smooth)))


def check_and_adapt(state: LocalState, new_thetas, new_stats, cfg: Config) -> LocalState:
    new_stats = np.atleast_2d(new_stats)
    q = new_stats.shape[1]
    stat = model_check_stat(state, new_thetas, new_stats, cfg)
    state.accepted = stat < q * new_stats.shape[0] * cfg.tol_model
    if state.accepted:
        state.theta_hat = state.theta_tilde.copy()
        state.rho = min(2.0 * state.rho, cfg.rho_max)
    else:
        state.rho = state.rho / 4.0
    return state


def make_result(state: LocalState, archive: SimArchive, trace, converged=True) -> FitResult:
    p = state.theta_hat.size
    try:
        cov = spd_solve(state.omega_hat, np.eye(p))
        cov = 0.5 * (cov + cov.T)
    except NotPositiveDefiniteError:
        cov = np.full((p, p), np.nan)
    estimate = state.theta_tilde if state.theta_tilde is not None else state.theta_hat
    # local linear prediction of the mean summary at the returned estimate
    tau_at = state.tau + state.jac_smooth @ (estimate - state.theta_hat)
    diag = diagnose(archive.observed, tau_at, state.sigma_smooth, p)
    return FitResult(
        estimate=estimate.copy(),
        covariance=cov,
        std_errors=np.sqrt(np.diag(cov)),
        n_simulations=len(archive),
        sh_stat=diag.sh_stat,
        sh_df=diag.sh_df,
        sh_pvalue=diag.sh_pvalue,
        std_scores=diag.std_scores,
        trace=list(trace),
        converged=converged,
    )


def run_local(global_state: GlobalState, engine, cfg: Config) -> FitResult:
    """Refine the global solution until the estimating function is negligible."""
    archive = engine.archive
    bounds = engine.bounds
    state = init_local(global_state, cfg)
    trace = list(global_state.trace)
    while True:
        local_fit_update(state, archive, cfg)
        propose_candidate(state, bounds)
        state.g_norm = score_norm(state)
        done = state.fit_size == cfg.nfit_local and state.g_norm < bounds.dim * cfg.tol_local
        if done:
            trace.append(TraceRecord("local", state.iter, state.rho, state.fit_size, None,
                                     state.g_norm, len(archive)))
            return make_result(state, archive, trace)
        if state.iter >= cfg.max_local_iters:
            partial = make_result(state, archive, trace, converged=False)
            raise NonConvergenceError(
                f"local phase did not converge in {cfg.max_local_iters} iterations",
                partial=partial, phase="local",
            )
        rng = engine.stream.generator(LOCAL_PROPOSAL, state.iter)
        omega = state.omega_hat
        chol, _ = cholesky_ridge(omega)
        new_thetas = ellipsoid_box_uniform(state.theta_tilde, chol @ chol.T, bounds, cfg.nadd_local, rng)
        new_stats = engine.simulate_into(new_thetas)
        check_and_adapt(state, new_thetas, new_stats, cfg)
        trace.append(TraceRecord("local", state.iter, state.rho, state.fit_size, bool(state.accepted),
                                 state.g_norm, len(archive)))
        state.fit_size = min(cfg.nfit_local, state.fit_size + cfg.nadd_local)
        state.iter += 1
