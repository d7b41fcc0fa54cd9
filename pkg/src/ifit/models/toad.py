"""Toad movement with random returns to previous refuges and alpha-stable foraging steps."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..core import Bounds, ModelError
from ..mathkit import quantile
from ..sampling import stable_from_uniforms

LAGS = (1, 2, 4, 8)
RETURN_THRESHOLD = 10.0
QUANTILE_LEVELS = np.concatenate([[0.01], np.arange(1, 20) * 0.05, [0.99]])
BLOCK = 2 + QUANTILE_LEVELS.size - 1
N_TOADS = 66
N_DAYS = 63
# displacements beyond this are clamped so summaries stay finite for tiny alpha
MAX_STEP = 1e300


class DegenerateLagError(ModelError):
    def __init__(self, lag):
        self.lag = lag
        super().__init__(f"no non-return displacements at lag {lag}")


def lag_distances(positions, lag):
    """Pooled ``|x[t+lag] - x[t]|`` over toads and days with both ends observed."""
    x = np.asarray(positions, dtype=float)
    d = np.abs(x[:, lag:] - x[:, :-lag])
    return d[np.isfinite(d)]


def lag_block(distances, lag, on_degenerate="raise"):
    """Return frequency, median and adjacent quantile gaps of the log non-return distances."""
    d = np.asarray(distances, dtype=float)
    if d.size == 0:
        raise ModelError(f"no observed displacement pairs at lag {lag}")
    returns = d < RETURN_THRESHOLD
    far = np.log(d[~returns])
    if far.size == 0:
        if on_degenerate == "raise":
            raise DegenerateLagError(lag)
        block = np.zeros(BLOCK)
        block[0] = returns.mean()
        block[1] = np.log(RETURN_THRESHOLD)
        return block
    qs = quantile(far, QUANTILE_LEVELS)
    return np.concatenate([[returns.mean(), np.median(far)], np.diff(qs)])


def toad_summary(positions, on_degenerate="raise"):
    """88-vector: per lag, return frequency, median and adjacent quantile gaps of log distances.

    ``positions`` is toads x days with NaN for missing entries. When a lag has
    no non-return distances ``on_degenerate="raise"`` raises
    :class:`DegenerateLagError`; ``"fill"`` reports the median as
    ``log(RETURN_THRESHOLD)`` and zero gaps.
    """
    return np.concatenate([lag_block(lag_distances(positions, lag), lag, on_degenerate) for lag in LAGS])


def simulate_paths(alpha, gamma, prob_return, n_toads, n_days, rng: np.random.Generator):
    """Daily refuge positions, toads x days; every toad starts at 0."""
    shape = (n_days - 1, n_toads)
    u = rng.uniform(-np.pi / 2, np.pi / 2, shape)
    e = rng.standard_exponential(shape)
    coin = rng.random(shape)
    pick = rng.random(shape)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        steps = stable_from_uniforms(alpha, gamma, u, e)
    steps = np.clip(np.nan_to_num(steps, nan=0.0, posinf=MAX_STEP, neginf=-MAX_STEP), -MAX_STEP, MAX_STEP)
    days = kernels.toad_paths(np.ascontiguousarray(steps), coin, pick, float(prob_return))
    return np.asarray(days).T.copy()


@dataclass
class ToadModel:
    bounds: Bounds = field(default_factory=lambda: Bounds([0.01, 0.0, 0.0], [2.0, 100.0, 1.0]))
    theta_true: np.ndarray = field(default_factory=lambda: np.array([1.7, 35.0, 0.6]))
    mask: np.ndarray | None = None  # toads x days, True where observed
    name: str = "toad"

    @property
    def n_toads(self):
        return N_TOADS if self.mask is None else self.mask.shape[0]

    @property
    def n_days(self):
        return N_DAYS if self.mask is None else self.mask.shape[1]

    @property
    def dim_theta(self):
        return 3

    @property
    def dim_stat(self):
        return len(LAGS) * BLOCK

    def simulate_positions(self, theta, rng: np.random.Generator):
        alpha, gamma, prob = (float(v) for v in theta)
        x = simulate_paths(alpha, gamma, prob, self.n_toads, self.n_days, rng)
        if self.mask is not None:
            x[~self.mask] = np.nan
        return x

    def simulate(self, theta, rng: np.random.Generator):
        return toad_summary(self.simulate_positions(theta, rng), on_degenerate="fill")


def load_toad_csv(path, n_toads=N_TOADS, n_days=N_DAYS):
    """Read ``toad_id,day,position`` rows; returns ``(positions, mask)`` (toads x days).

    Integer toad ids and days are 1-based indices. Empty positions are missing.
    Dimensions grow past the defaults if the file needs it.
    """
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["toad_id", "day", "position"]:
            raise ValueError("expected header 'toad_id,day,position'")
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != 3:
                raise ValueError(f"line {lineno}: expected 3 fields, got {len(rec)}")
            toad, day, pos = (f.strip() for f in rec)
            try:
                toad_i, day_i = int(toad), int(day)
            except ValueError:
                raise ValueError(f"line {lineno}: toad_id and day must be integers") from None
            if toad_i < 1 or day_i < 1:
                raise ValueError(f"line {lineno}: toad_id and day are 1-based")
            if pos == "":
                value = np.nan
            else:
                try:
                    value = float(pos)
                except ValueError:
                    raise ValueError(f"line {lineno}: non-numeric position {pos!r}") from None
                if not np.isfinite(value):
                    raise ValueError(f"line {lineno}: non-finite position {pos!r}")
            rows.append((toad_i, day_i, value, lineno))
    nt = max([n_toads] + [r[0] for r in rows])
    nd = max([n_days] + [r[1] for r in rows])
    positions = np.full((nt, nd), np.nan)
    seen = set()
    for toad_i, day_i, value, lineno in rows:
        if (toad_i, day_i) in seen:
            raise ValueError(f"line {lineno}: duplicate entry for toad {toad_i}, day {day_i}")
        seen.add((toad_i, day_i))
        positions[toad_i - 1, day_i - 1] = value
    return positions, np.isfinite(positions)


def write_toad_csv(path, positions):
    """Inverse of :func:`load_toad_csv`; missing cells are written with an empty position."""
    positions = np.asarray(positions, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["toad_id", "day", "position"])
        for i in range(positions.shape[0]):
            for j in range(positions.shape[1]):
                v = positions[i, j]
                w.writerow([i + 1, j + 1, repr(float(v)) if np.isfinite(v) else ""])
