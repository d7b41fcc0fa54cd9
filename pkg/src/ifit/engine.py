"""Simulation bookkeeping shared by both phases."""

from __future__ import annotations

import logging

import numpy as np

from .core import Bounds, ModelError, SimArchive, Simulator
from .sampling import RETRY, SIMULATE, RngStream, generator_from_seed

log = logging.getLogger(__name__)


def run_simulator(simulator: Simulator, thetas, seeds):
    """Simulate every row of ``thetas``; row ``i`` uses call seed ``seeds[i]``."""
    batch = getattr(simulator, "simulate_batch", None)
    if batch is not None:
        out = np.asarray(batch(thetas, seeds), dtype=float)
    else:
        out = np.array([np.asarray(simulator.simulate(th, generator_from_seed(s)), dtype=float)
                        for th, s in zip(thetas, seeds)])
    q = simulator.dim_stat
    if out.ndim != 2 or out.shape != (len(thetas), q):
        raise ModelError(f"simulator returned shape {out.shape}, expected {(len(thetas), q)}")
    bad = np.flatnonzero(~np.all(np.isfinite(out), axis=1))
    if bad.size:
        raise ModelError("simulator returned non-finite statistics", theta=thetas[bad[0]])
    return out


class Engine:
    """Owns the archive of one fit and the only path by which simulations enter it.

    Every call of the simulator for a new archive row ``i`` uses the substream
    ``(SIMULATE, i)``; a failing batch is retried once on ``(RETRY, i)``
    streams before the error propagates.
    """

    def __init__(self, simulator: Simulator, t_obs, stream: RngStream):
        self.simulator = simulator
        self.bounds: Bounds = simulator.bounds
        t_obs = np.asarray(t_obs, dtype=float).reshape(-1)
        if t_obs.size != simulator.dim_stat:
            raise ValueError(f"observed summary has length {t_obs.size}, model produces {simulator.dim_stat}")
        if not np.all(np.isfinite(t_obs)):
            raise ValueError("observed summary must be finite")
        self.archive = SimArchive(t_obs, self.bounds.dim)
        self.stream = stream

    @property
    def n_simulations(self) -> int:
        return len(self.archive)

    def simulate_into(self, thetas):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        start = len(self.archive)
        idx = range(start, start + thetas.shape[0])
        try:
            stats = run_simulator(self.simulator, thetas, [self.stream.seed_for(SIMULATE, i) for i in idx])
        except Exception as exc:  # noqa: BLE001 - retried once on fresh substreams
            log.warning("simulation batch failed (%s); retrying on fresh substreams", exc)
            try:
                stats = run_simulator(self.simulator, thetas, [self.stream.seed_for(RETRY, i) for i in idx])
            except ModelError:
                raise
            except Exception as exc2:
                raise ModelError(f"simulation failed twice: {exc2}") from exc2
        self.archive.extend(thetas, stats)
        return stats
