"""Small simulators shared by the engine tests."""

from dataclasses import dataclass, field

import numpy as np

from ifit.core import Bounds


@dataclass
class QuadraticToy:
    """t = theta^2 + noise in one dimension."""

    bounds: Bounds = field(default_factory=lambda: Bounds([-1.0], [1.0]))
    noise: float = 0.01
    dim_theta: int = 1
    dim_stat: int = 1

    def simulate(self, theta, rng):
        return np.array([theta[0] ** 2 + self.noise * rng.standard_normal()])


@dataclass
class LinearToy:
    """t = a + B theta + noise; the bridge is known exactly."""

    a: np.ndarray
    b: np.ndarray
    bounds: Bounds
    noise: float = 0.1

    @property
    def dim_theta(self):
        return self.b.shape[1]

    @property
    def dim_stat(self):
        return self.b.shape[0]

    def simulate(self, theta, rng):
        return self.a + self.b @ theta + self.noise * rng.standard_normal(self.a.size)


@dataclass
class ConstantToy:
    bounds: Bounds = field(default_factory=lambda: Bounds([0.0, 0.0], [1.0, 1.0]))
    dim_theta: int = 2
    dim_stat: int = 3

    def simulate(self, theta, rng):
        return np.array([1.0, theta[0] + rng.standard_normal(), 2.0])
