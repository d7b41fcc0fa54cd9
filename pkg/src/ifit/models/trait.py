"""Trait distribution in a local community under competition and immigration."""

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..core import Bounds, ModelError
from ..mathkit import gini, quantile

TRAIT_GRID = np.arange(1001) / 1000.0
QUANTILE_LEVELS = np.concatenate([[0.01], np.arange(1, 20) * 0.05, [0.99]])
WEIGHT_SCALE = 2 ** 30


def log_fitness(theta, grid=TRAIT_GRID):
    """``log F(u)`` with ``F(u) = 1 - omega + omega * phi(u; mu, sigma)``."""
    _, mu, sigma, omega = (float(v) for v in theta)
    if omega == 0.0:
        return np.zeros_like(grid)
    if sigma <= 0.0:
        raise ModelError("fitness undefined for sigma = 0 with omega > 0", theta=theta)
    log_phi = -0.5 * ((grid - mu) / sigma) ** 2 - np.log(sigma) - 0.5 * np.log(2 * np.pi)
    with np.errstate(divide="ignore"):
        return np.logaddexp(np.log1p(-omega), np.log(omega) + log_phi)


def integer_weights(theta, grid=TRAIT_GRID):
    """Fitness rescaled to integers (max weight ``2**30``) so sampling is exact."""
    lf = log_fitness(theta, grid)
    return np.floor(np.exp(lf - lf.max()) * WEIGHT_SCALE + 0.5).astype(np.int64)


@dataclass
class TraitModel:
    bounds: Bounds = field(default_factory=lambda: Bounds([0.0] * 4, [1.0] * 4))
    theta_true: np.ndarray = field(default_factory=lambda: np.array([0.2, 0.7, 0.1, 0.7]))
    population: int = 500
    steps: int = 5000
    name: str = "trait"

    @property
    def dim_theta(self):
        return 4

    @property
    def dim_stat(self):
        return 2 + QUANTILE_LEVELS.size

    def simulate_counts(self, theta, rng: np.random.Generator):
        """Final abundance of every grid trait."""
        gamma = float(theta[0])
        weights = integer_weights(theta)
        cdf = np.cumsum(weights)
        u0 = rng.random(self.population)
        traits = np.searchsorted(cdf, (u0 * cdf[-1]).astype(np.int64), side="right").astype(np.int64)
        u = rng.random((self.steps, 3))
        return np.asarray(kernels.trait_dynamics(traits, weights, cdf, gamma, u))

    def summarize(self, counts):
        counts = np.asarray(counts)
        present = counts[counts > 0]
        values = np.repeat(TRAIT_GRID, counts)
        return np.concatenate([[present.size, gini(present)], quantile(values, QUANTILE_LEVELS)])

    def simulate(self, theta, rng: np.random.Generator):
        return self.summarize(self.simulate_counts(theta, rng))
