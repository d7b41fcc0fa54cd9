"""Global search: space-filling start, k-NN bridge estimates, elite reproduction."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import Bounds, Config, NonConvergenceError, SimArchive, TraceRecord
from .mathkit import RobustScatter, cholesky_ridge, mahalanobis_sq, robust_scatter
from .sampling import GLOBAL_PROPOSAL, INIT_DESIGN, latin_hypercube, truncated_mvn_mixture

log = logging.getLogger(__name__)


@dataclass
class GlobalState:
    archive: SimArchive
    bounds: Bounds
    d0: np.ndarray
    sigma: RobustScatter | None = None
    bridge: np.ndarray | None = None
    distances: np.ndarray | None = None
    elite_idx: np.ndarray | None = None
    elite_size: int = 0
    iter: int = 0
    trace: list[TraceRecord] = field(default_factory=list)

    @property
    def elite(self) -> np.ndarray:
        return self.archive.thetas[self.elite_idx]


def neighborhood_size(n):
    return math.isqrt(n - 1) + 1 if n > 0 else 0  # ceil(sqrt(n))


def bridge_knn_all(thetas, stats, d0):
    """Tricube k-NN estimates of the bridge function at every archive point.

    Distances are Euclidean after dividing each coordinate by ``sqrt(d0)``;
    the neighborhood holds ``ceil(sqrt(N))`` points, the point itself included.
    """
    thetas = np.asarray(thetas, dtype=float)
    scaled = np.ascontiguousarray(thetas / np.sqrt(d0))
    k = neighborhood_size(thetas.shape[0])
    return kernels.knn_tricube(scaled, np.ascontiguousarray(stats, dtype=float), k)


def bridge_knn(archive: SimArchive, d0, i):
    """Bridge estimate at archive point ``i`` alone."""
    thetas = archive.thetas / np.sqrt(d0)
    stats = archive.stats
    d2 = np.sum((thetas - thetas[i]) ** 2, axis=1)
    k = neighborhood_size(len(archive))
    dbar2 = np.partition(d2, k - 1)[k - 1]
    if dbar2 == 0.0:
        return stats[np.flatnonzero(d2 == 0.0)[:k]].mean(axis=0)
    sel = d2 < dbar2
    w = (1.0 - np.sqrt(d2[sel] / dbar2) ** 3) ** 3
    return w @ stats[sel] / w.sum()


def elite_size(n_k, cfg: Config):
    frac = (n_k / cfg.n_init) ** 2
    return int(math.ceil(cfg.n_elite + (cfg.n_init - cfg.n_elite) * cfg.a_elite ** frac))


def global_converged(state: GlobalState, cfg: Config) -> bool:
    elite = state.elite
    if elite.shape[0] < 2:
        return True
    m = elite.mean(axis=0)
    sd = elite.std(axis=0, ddof=1)
    return bool(np.all(sd < np.maximum(1.0, np.abs(m)) * cfg.tol_global))


def rank_points(state: GlobalState, cfg: Config):
    """Bridge estimates, weighting matrix and elite for the current archive."""
    arch = state.archive
    state.bridge = bridge_knn_all(arch.thetas, arch.stats, state.d0)
    state.sigma = robust_scatter(arch.stats - state.bridge)
    state.distances = mahalanobis_sq(arch.observed - state.bridge, state.sigma.sigma)
    e = min(elite_size(len(arch), cfg), len(arch))
    order = np.argsort(state.distances, kind="stable")
    state.elite_idx = order[:e]
    state.elite_size = e


def reproduce(state: GlobalState, cfg: Config, rng):
    elite = state.elite
    cov = np.cov(elite, rowvar=False, ddof=1).reshape(elite.shape[1], elite.shape[1])
    if not np.allclose(cov, 0.0):
        chol, _ = cholesky_ridge(cov)
        cov = chol @ chol.T
    return truncated_mvn_mixture(elite, cov, state.bounds, cfg.nadd_global, rng)


def init_global(engine, cfg: Config) -> GlobalState:
    bounds = engine.bounds
    thetas = latin_hypercube(cfg.n_init, bounds, engine.stream.generator(INIT_DESIGN, 0))
    engine.simulate_into(thetas)
    return GlobalState(archive=engine.archive, bounds=bounds, d0=bounds.width ** 2)


def global_step(state: GlobalState, cfg: Config) -> bool:
    """Rank the archive and test convergence."""
    rank_points(state, cfg)
    done = global_converged(state, cfg)
    state.trace.append(TraceRecord(phase="global", k=state.iter, n_simulations=len(state.archive)))
    return done


def global_iterate(state: GlobalState, engine, cfg: Config) -> bool:
    """One pass of ranking, convergence test and (if not converged) reproduction.

    Returns True once the elite is concentrated enough to stop.
    """
    if global_step(state, cfg):
        return True
    rng = engine.stream.generator(GLOBAL_PROPOSAL, state.iter)
    new = reproduce(state, cfg, rng)
    engine.simulate_into(new)
    state.iter += 1
    return False


def run_global(engine, cfg: Config) -> GlobalState:
    """Iterate the global phase to convergence or raise :class:`NonConvergenceError`."""
    state = init_global(engine, cfg)
    while state.iter < cfg.max_global_iters:
        if global_iterate(state, engine, cfg):
            break
    else:
        if not global_step(state, cfg):
            raise NonConvergenceError(
                f"global phase did not converge in {cfg.max_global_iters} iterations",
                partial=state, phase="global",
            )
    log.info("global phase converged after %d iterations (N=%d)", state.iter, len(state.archive))
    return state
