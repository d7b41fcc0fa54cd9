"""Shared types: parameter box, tuning constants, simulation archive, results."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Any, Protocol, runtime_checkable

import numpy as np


class IfitError(Exception):
    """Base class for engine errors."""


class ConfigError(IfitError, ValueError):
    """Raised when a :class:`Config` violates one or more invariants."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ModelError(IfitError):
    """A simulator failed or produced unusable output.

    ``theta`` holds the parameter vector that triggered the failure when known.
    """

    def __init__(self, message, theta=None):
        self.theta = None if theta is None else np.asarray(theta, dtype=float)
        if self.theta is not None:
            message = f"{message} (theta={self.theta.tolist()})"
        super().__init__(message)


class DegenerateStatisticError(IfitError, ValueError):
    """A summary statistic has zero spread, so no weighting matrix exists."""

    def __init__(self, index, message=None):
        self.index = int(index)
        super().__init__(message or f"summary statistic {self.index} has zero MAD (constant)")


class NonConvergenceError(IfitError):
    """An iteration cap was hit. ``partial`` carries whatever state was reached."""

    def __init__(self, message, partial=None, phase=None):
        self.partial = partial
        self.phase = phase
        super().__init__(message)


@dataclass(frozen=True)
class Bounds:
    """Box ``lower[i] <= theta[i] <= upper[i]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float).reshape(-1)
        hi = np.array(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise ValueError("lower and upper must be non-empty vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("bounds must be finite")
        if np.any(lo >= hi):
            bad = np.flatnonzero(lo >= hi).tolist()
            raise ValueError(f"lower must be < upper (violated at {bad})")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, theta, atol=0.0) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= self.lower - atol) and np.all(theta <= self.upper + atol))

    def clip(self, theta):
        return np.clip(theta, self.lower, self.upper)


@dataclass(frozen=True)
class Config:
    """Tuning constants. Defaults reproduce the published settings."""

    n_init: int = 1000
    n_elite: int = 100
    a_elite: float = 0.5
    tol_global: float = 0.1
    tol_local: float = 1.0
    tol_model: float = 1.5
    nfit_local: int = 4000
    nadd_global: int = 100
    nadd_local: int = 10
    rho_max: float = 0.1
    lambda_: float = 0.1
    max_global_iters: int = 500
    max_local_iters: int = 2000
    model_check_center: str = "candidate"
    seed: int = 0

    # JSON uses "lambda"; the attribute can't.
    _JSON_RENAMES = {"lambda_": "lambda"}

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            out[self._JSON_RENAMES.get(f.name, f.name)] = getattr(self, f.name)
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Config":
        back = {v: k for k, v in cls._JSON_RENAMES.items()}
        names = {f.name for f in dataclasses.fields(cls)}
        kwargs = {}
        unknown = []
        for key, value in data.items():
            name = back.get(key, key)
            if name not in names:
                unknown.append(key)
            else:
                kwargs[name] = value
        if unknown:
            raise ConfigError([f"unknown config key {k!r}" for k in unknown])
        return validate_config(cls(**kwargs))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Config":
        return cls.from_dict(json.loads(text))

    def replace(self, **changes) -> "Config":
        return validate_config(dataclasses.replace(self, **changes))


def _is_int(x) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def validate_config(cfg: Config) -> Config:
    """Check every invariant of ``cfg``; raise :class:`ConfigError` listing all violations."""
    problems = []
    for name in ("n_init", "n_elite", "nfit_local", "nadd_global", "nadd_local",
                 "max_global_iters", "max_local_iters"):
        v = getattr(cfg, name)
        if not _is_int(v) or v < 1:
            problems.append(f"{name} must be a positive integer (got {v!r})")
    for name in ("tol_global", "tol_local", "tol_model", "rho_max"):
        v = getattr(cfg, name)
        if not (isinstance(v, (int, float)) and np.isfinite(v) and v > 0):
            problems.append(f"{name} must be a positive real (got {v!r})")
    if not (0.0 < cfg.a_elite < 1.0):
        problems.append(f"a_elite must lie in (0, 1) (got {cfg.a_elite!r})")
    if not (0.0 < cfg.lambda_ <= 1.0):
        problems.append(f"lambda must lie in (0, 1] (got {cfg.lambda_!r})")
    if _is_int(cfg.n_elite) and _is_int(cfg.n_init) and cfg.n_elite > cfg.n_init:
        problems.append("n_elite exceeds n_init")
    if _is_int(cfg.n_elite) and _is_int(cfg.nfit_local) and cfg.nfit_local < cfg.n_elite:
        problems.append("nfit_local is smaller than n_elite")
    if cfg.model_check_center not in ("candidate", "current"):
        problems.append("model_check_center must be 'candidate' or 'current'")
    if not _is_int(cfg.seed) or not (0 <= cfg.seed < 2**64):
        problems.append("seed must be an unsigned 64-bit integer")
    if problems:
        raise ConfigError(problems)
    return cfg


@runtime_checkable
class Simulator(Protocol):
    """A generative model composed with its summary-statistic map.

    ``simulate(theta, rng)`` must be a pure function of ``theta`` and the
    state of ``rng`` (a :class:`numpy.random.Generator`) and return a finite
    vector of length ``dim_stat``.
    """

    bounds: Bounds
    dim_stat: int

    @property
    def dim_theta(self) -> int: ...

    def simulate(self, theta: np.ndarray, rng: np.random.Generator) -> np.ndarray: ...


class SimArchive:
    """Append-only store of ``(theta_i, t_i)`` pairs plus the observed summary."""

    def __init__(self, observed, dim_theta, capacity=4096):
        self.observed = np.asarray(observed, dtype=float).copy()
        self.observed.flags.writeable = False
        self._p = int(dim_theta)
        self._q = self.observed.size
        if self._q < self._p:
            raise ValueError(f"need at least as many statistics as parameters (q={self._q} < p={self._p})")
        self._thetas = np.empty((capacity, self._p))
        self._stats = np.empty((capacity, self._q))
        self._n = 0

    def __len__(self):
        return self._n

    @property
    def dim_theta(self):
        return self._p

    @property
    def dim_stat(self):
        return self._q

    @property
    def thetas(self) -> np.ndarray:
        v = self._thetas[: self._n]
        v.flags.writeable = False
        return v

    @property
    def stats(self) -> np.ndarray:
        v = self._stats[: self._n]
        v.flags.writeable = False
        return v

    def extend(self, thetas, stats):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        stats = np.atleast_2d(np.asarray(stats, dtype=float))
        if thetas.shape[0] != stats.shape[0]:
            raise ValueError("thetas and stats must have the same number of rows")
        if thetas.shape[1] != self._p or stats.shape[1] != self._q:
            raise ValueError("dimension mismatch when extending archive")
        if not (np.all(np.isfinite(thetas)) and np.all(np.isfinite(stats))):
            raise ValueError("archive entries must be finite")
        m = thetas.shape[0]
        need = self._n + m
        if need > self._thetas.shape[0]:
            cap = max(need, 2 * self._thetas.shape[0])
            self._thetas = np.concatenate([self._thetas[: self._n], np.empty((cap - self._n, self._p))])
            self._stats = np.concatenate([self._stats[: self._n], np.empty((cap - self._n, self._q))])
        self._thetas[self._n:need] = thetas
        self._stats[self._n:need] = stats
        self._n = need


@dataclass
class TraceRecord:
    phase: str
    k: int
    rho: float | None = None
    fit_size: int | None = None
    accepted: bool | None = None
    g_norm: float | None = None
    n_simulations: int = 0


@dataclass
class FitResult:
    estimate: np.ndarray
    covariance: np.ndarray
    std_errors: np.ndarray
    n_simulations: int
    sh_stat: float
    sh_df: int
    sh_pvalue: float | None
    std_scores: np.ndarray
    trace: list[TraceRecord] = field(default_factory=list)
    converged: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {
            "estimate": np.asarray(self.estimate).tolist(),
            "covariance": np.asarray(self.covariance).tolist(),
            "std_errors": np.asarray(self.std_errors).tolist(),
            "n_simulations": int(self.n_simulations),
            "sh_stat": float(self.sh_stat),
            "sh_df": int(self.sh_df),
            "sh_pvalue": None if self.sh_pvalue is None else float(self.sh_pvalue),
            "std_scores": np.asarray(self.std_scores).tolist(),
            "trace": [dataclasses.asdict(r) for r in self.trace],
            "converged": bool(self.converged),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "FitResult":
        return cls(
            estimate=np.asarray(d["estimate"], dtype=float),
            covariance=np.asarray(d["covariance"], dtype=float),
            std_errors=np.asarray(d["std_errors"], dtype=float),
            n_simulations=int(d["n_simulations"]),
            sh_stat=float(d["sh_stat"]),
            sh_df=int(d["sh_df"]),
            sh_pvalue=None if d["sh_pvalue"] is None else float(d["sh_pvalue"]),
            std_scores=np.asarray(d["std_scores"], dtype=float),
            trace=[TraceRecord(**r) for r in d.get("trace", [])],
            converged=bool(d.get("converged", True)),
        )
