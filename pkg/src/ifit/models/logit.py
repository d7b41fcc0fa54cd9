"""Logistic regression with an intercept, a trend and two correlated covariates."""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ..core import Bounds


def make_design(n, rng: np.random.Generator):
    """Columns: intercept, trend ``(2i - n)/(n - 1)``, and ``(z, w)`` bivariate normal."""
    i = np.arange(1, n + 1)
    trend = (2 * i - n) / (n - 1)
    zw = rng.multivariate_normal([0.0, 0.0], [[1.0, 1.0], [1.0, 2.0]], size=n)
    return np.column_stack([np.ones(n), trend, zw])


@dataclass
class LogitModel:
    """Summary statistics are the sufficient statistics ``X'y`` of a fixed design."""

    design: np.ndarray
    bounds: Bounds = field(default_factory=lambda: Bounds([-5.0] * 4, [5.0] * 4))
    theta_true: np.ndarray = field(default_factory=lambda: np.array([-1.0, 1.0, 0.5, -0.5]))
    name: str = "logit"

    @classmethod
    def random(cls, rng: np.random.Generator, n=100):
        return cls(design=make_design(n, rng))

    @property
    def dim_theta(self):
        return 4

    @property
    def dim_stat(self):
        return self.design.shape[1]

    def simulate_data(self, theta, rng: np.random.Generator):
        prob = expit(self.design @ np.asarray(theta, dtype=float))
        return (rng.random(prob.size) < prob).astype(float)

    def summarize(self, y):
        return self.design.T @ y

    def simulate(self, theta, rng: np.random.Generator):
        return self.summarize(self.simulate_data(theta, rng))


def logit_mle(design, t_obs, tol=1e-12, max_iter=100):
    """Newton-Raphson maximum likelihood from the sufficient statistics ``X'y``."""
    x = np.asarray(design, dtype=float)
    t = np.asarray(t_obs, dtype=float)
    beta = np.zeros(x.shape[1])
    for _ in range(max_iter):
        prob = expit(x @ beta)
        score = t - x.T @ prob
        info = (x * (prob * (1.0 - prob))[:, None]).T @ x
        step = np.linalg.solve(info, score)
        beta = beta + step
        if np.max(np.abs(step)) < tol:
            return beta
    raise RuntimeError("logit MLE did not converge (separation?)")
