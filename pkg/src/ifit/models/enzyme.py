"""Stochastic Michaelis-Menten kinetics simulated exactly, summarized by spline coefficients."""

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..core import Bounds
from ..mathkit import bspline_basis, spd_solve

INIT_STATE = (100, 100, 0, 0)
GRID = np.arange(1, 51) / 50.0


def gillespie_ssa(rates, init_state, grid, rng: np.random.Generator, chunk=4096):
    """States ``(E, S, C, P)`` at each ``grid`` time, shape ``(4, len(grid))``."""
    th1, th2, th3 = (float(r) for r in rates)
    if min(th1, th2, th3) < 0:
        raise ValueError("reaction rates must be nonnegative")
    grid = np.ascontiguousarray(grid, dtype=float)
    e0, s0, c0, p0 = (int(v) for v in init_state)
    buf = rng.random(chunk)
    while True:
        states, used = kernels.gillespie_mm(th1, th2, th3, e0, s0, c0, p0, grid, buf)
        if used >= 0:
            return np.asarray(states)
        buf = np.concatenate([buf, rng.random(buf.size)])


@dataclass
class EnzymeModel:
    bounds: Bounds = field(default_factory=lambda: Bounds([0.0] * 3, [50.0] * 3))
    theta_true: np.ndarray = field(default_factory=lambda: np.array([0.5, 2.5, 1.0]))
    init_state: tuple = INIT_STATE
    grid: np.ndarray = field(default_factory=lambda: GRID.copy())
    name: str = "enzyme"

    def __post_init__(self):
        basis = bspline_basis(self.grid)
        # coefficients = proj @ values
        self._proj = spd_solve(basis.T @ basis, basis.T)

    @property
    def dim_theta(self):
        return 3

    @property
    def dim_stat(self):
        return 8

    def summarize(self, states):
        c_traj = states[2].astype(float)
        p_traj = states[3].astype(float)
        return np.concatenate([self._proj @ c_traj, self._proj @ p_traj])

    def simulate(self, theta, rng: np.random.Generator):
        return self.summarize(gillespie_ssa(theta, self.init_state, self.grid, rng))
