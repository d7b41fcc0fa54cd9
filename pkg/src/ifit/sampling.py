"""Random draws: reproducible streams, space-filling and truncated samplers."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import Bounds
from .mathkit import cholesky_ridge

log = logging.getLogger(__name__)

# substream purposes
SIMULATE = 0
INIT_DESIGN = 1
GLOBAL_PROPOSAL = 2
LOCAL_PROPOSAL = 3
DATASET = 4
RETRY = 5


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream.

    A stream is identified by a master ``seed`` and a ``path`` of integers
    (replication id, fit id, ...). Draws are taken from substreams addressed
    by ``(purpose, index)``, so the numbers a simulation sees depend only on
    ``(seed, path, purpose, index)`` and never on scheduling.
    """

    seed: int
    path: tuple[int, ...] = ()

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.path + tuple(int(i) for i in ids))

    def seed_for(self, purpose: int, index: int) -> int:
        """64-bit seed of a substream, used for external simulators."""
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path + (int(purpose), int(index)))
        return int(ss.generate_state(1, np.uint64)[0])

    def generator(self, purpose: int, index: int = 0) -> np.random.Generator:
        return generator_from_seed(self.seed_for(purpose, index))


def generator_from_seed(seed: int) -> np.random.Generator:
    """The generator an in-process simulator receives for a 64-bit call seed."""
    return np.random.Generator(np.random.Philox(int(seed)))


def latin_hypercube(n, bounds: Bounds, rng: np.random.Generator):
    """``n`` points, one per stratum on every margin, jittered uniformly."""
    p = bounds.dim
    u = np.empty((n, p))
    for j in range(p):
        perm = rng.permutation(n)
        u[:, j] = (perm + rng.random(n)) / n
    pts = bounds.lower + u * bounds.width
    # guard the open upper edge against round-off
    return np.minimum(pts, np.nextafter(bounds.upper, bounds.lower))


def truncated_mvn_mixture(elite, cov, bounds: Bounds, n, rng: np.random.Generator, max_tries=1000):
    """Draw ``n`` points from an equal-weight mixture of normals truncated to the box.

    Each component is centred at a row of ``elite`` with covariance ``cov``.
    After ``max_tries`` rejections the last draw is clamped into the box.
    """
    elite = np.atleast_2d(np.asarray(elite, dtype=float))
    cov = np.asarray(cov, dtype=float)
    p = elite.shape[1]
    if np.allclose(cov, 0.0):
        chol = np.zeros((p, p))
    else:
        chol, _ = cholesky_ridge(cov)
    out = np.empty((n, p))
    clamped = 0
    for i in range(n):
        center = elite[rng.integers(elite.shape[0])]
        for _ in range(max_tries):
            x = center + chol @ rng.standard_normal(p)
            if bounds.contains(x):
                break
        else:
            x = bounds.clip(x)
            clamped += 1
        out[i] = x
    if clamped:
        log.info("truncated normal: %d of %d draws clamped into the box", clamped, n)
    return out


def ellipsoid_box_uniform(center, omega, bounds: Bounds, n, rng: np.random.Generator, max_tries=10000):
    """Uniform draws from ``{x in box : (x - c)' omega (x - c) <= 1}``."""
    center = np.asarray(center, dtype=float)
    p = center.size
    chol, _ = cholesky_ridge(omega)
    # x = c + L^{-T} z  gives  (x-c)' L L' (x-c) = z'z
    out = np.empty((n, p))
    clamped = 0
    for i in range(n):
        for _ in range(max_tries):
            z = rng.standard_normal(p)
            z *= rng.random() ** (1.0 / p) / np.linalg.norm(z)
            x = center + linalg.solve_triangular(chol, z, lower=True, trans="T", check_finite=False)
            if bounds.contains(x):
                break
        else:
            x = bounds.clip(x)
            clamped += 1
        out[i] = x
    if clamped:
        log.info("ellipsoid sampler: %d of %d draws clamped into the box", clamped, n)
    return out


def alpha_stable(alpha, gamma_scale, rng: np.random.Generator, size=None):
    """Symmetric alpha-stable variates (Chambers-Mallows-Stuck)."""
    u = rng.uniform(-np.pi / 2, np.pi / 2, size)
    e = rng.standard_exponential(size)
    return stable_from_uniforms(alpha, gamma_scale, u, e)


def stable_from_uniforms(alpha, gamma_scale, u, e):
    """CMS transform of ``u ~ U(-pi/2, pi/2)`` and ``e ~ Exp(1)``."""
    if not (0.0 < alpha <= 2.0):
        raise ValueError("alpha must lie in (0, 2]")
    if alpha == 1.0:
        return gamma_scale * np.tan(u)
    x = (np.sin(alpha * u) / np.cos(u) ** (1.0 / alpha)
         * (np.cos(u - alpha * u) / e) ** ((1.0 - alpha) / alpha))
    return gamma_scale * x
