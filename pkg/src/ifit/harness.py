"""End-to-end fitting, Monte Carlo benchmarks and result files."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import Config, FitResult, IfitError, NonConvergenceError, validate_config
from .engine import Engine
from .global_search import run_global
from .local_search import run_local
from .models import make_dataset
from .sampling import DATASET, RngStream

log = logging.getLogger(__name__)


def fit(simulator, t_obs, cfg: Config | None = None, stream: RngStream | None = None) -> FitResult:
    """Global search followed by local refinement.

    The fit draws all randomness from ``stream`` (default: ``RngStream(cfg.seed)``).
    """
    cfg = validate_config(cfg or Config())
    stream = stream if stream is not None else RngStream(cfg.seed)
    engine = Engine(simulator, t_obs, stream)
    gstate = run_global(engine, cfg)
    result = run_local(gstate, engine, cfg)
    assert result.n_simulations == len(engine.archive)
    return result


def worker_count(threads=None):
    """Pool size from ``threads`` or ``IFIT_THREADS`` (0 = one per CPU)."""
    if threads is None:
        threads = int(os.environ.get("IFIT_THREADS", "1") or 1)
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


def _map(fn, jobs, threads):
    n = worker_count(threads)
    if n <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, *zip(*jobs)))


@dataclass
class Replication:
    """One synthetic dataset and its fit."""

    index: int
    estimate: list | None = None
    std_errors: list | None = None
    n_simulations: int = 0
    error: str | None = None
    t_obs: list | None = None
    extra: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.error is None


def replicate(model_name, cfg: Config, master_seed, index, fit_id=0, keep_design=False):
    """Generate dataset ``index`` from the true parameters and fit it with engine ``fit_id``."""
    root = RngStream(int(master_seed))
    model, t_obs = make_dataset(model_name, root.generator(DATASET, index))
    rep = Replication(index=index, t_obs=np.asarray(t_obs).tolist())
    if keep_design and hasattr(model, "design"):
        rep.extra["design"] = model.design.tolist()
    try:
        res = fit(model, t_obs, cfg, stream=root.child(index, fit_id))
    except IfitError as exc:
        rep.error = f"{type(exc).__name__}: {exc}"
        partial = getattr(exc, "partial", None)
        if isinstance(partial, FitResult):
            rep.n_simulations = partial.n_simulations
        elif partial is not None and hasattr(partial, "archive"):
            rep.n_simulations = len(partial.archive)
        return rep
    rep.estimate = res.estimate.tolist()
    rep.std_errors = res.std_errors.tolist()
    rep.n_simulations = res.n_simulations
    return rep


@dataclass
class BenchmarkReport:
    model: str
    B: int
    ams: float
    aare: float
    se: list
    ave_se: list
    sd_se: list
    failures: int
    failure_reasons: list
    flagged: bool
    replications: list = field(default_factory=list)

    def to_dict(self):
        d = dataclasses.asdict(self)
        return d


def summarize_benchmark(model_name, theta_true, reps: list[Replication]) -> BenchmarkReport:
    b = len(reps)
    good = [r for r in reps if r.ok]
    ams = sum(r.n_simulations for r in reps) / b if b else float("nan")
    theta_true = np.asarray(theta_true, dtype=float)
    if good:
        est = np.array([r.estimate for r in good])
        ses = np.array([r.std_errors for r in good])
        aare = float(np.mean(np.abs((est - theta_true) / theta_true)))
        se = est.std(axis=0, ddof=1) if len(good) > 1 else np.full(theta_true.size, np.nan)
        ave_se = ses.mean(axis=0)
        sd_se = ses.std(axis=0, ddof=1) if len(good) > 1 else np.full(theta_true.size, np.nan)
    else:
        aare = float("nan")
        se = ave_se = sd_se = np.full(theta_true.size, np.nan)
    failures = b - len(good)
    return BenchmarkReport(
        model=model_name, B=b, ams=float(ams), aare=aare,
        se=np.asarray(se).tolist(), ave_se=np.asarray(ave_se).tolist(), sd_se=np.asarray(sd_se).tolist(),
        failures=failures, failure_reasons=[r.error for r in reps if not r.ok],
        flagged=failures > 0.05 * b,
        replications=[dataclasses.asdict(r) for r in reps],
    )


def benchmark(model_name, B, cfg: Config | None = None, master_seed=0, threads=None, keep_design=False):
    """Fit ``B`` synthetic datasets generated at the model's true parameters."""
    cfg = validate_config(cfg or Config())
    jobs = [(model_name, cfg, master_seed, j, 0, keep_design) for j in range(B)]
    reps = _map(replicate, jobs, threads)
    model, _ = make_dataset(model_name, RngStream(int(master_seed)).generator(DATASET, 0))
    return summarize_benchmark(model_name, model.theta_true, reps)


@dataclass
class McErrorReport:
    model: str
    G: int
    R: int
    ratio: list
    failures: int
    estimates: list = field(default_factory=list)  # G x R x p, None for failed fits

    def to_dict(self):
        return dataclasses.asdict(self)


def anova_within_ratio(groups):
    """Per-coordinate ``SS_within / SS_total`` for a list of (R_g, p) arrays."""
    allv = np.concatenate(groups, axis=0)
    grand = allv.mean(axis=0)
    sst = np.sum((allv - grand) ** 2, axis=0)
    ssw = sum(np.sum((g - g.mean(axis=0)) ** 2, axis=0) for g in groups)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(sst > 0, ssw / sst, 0.0)
    return np.clip(ratio, 0.0, 1.0)


def mc_error_study(model_name, G, R, cfg: Config | None = None, seed=0, threads=None, same_engine_seed=False):
    """Refit each of ``G`` datasets ``R`` times with independent engine streams."""
    if G < 2 or R < 2:
        raise ValueError("need G >= 2 datasets and R >= 2 repeats")
    cfg = validate_config(cfg or Config())
    jobs = [(model_name, cfg, seed, g, 0 if same_engine_seed else r) for g in range(G) for r in range(R)]
    reps = _map(replicate, jobs, threads)
    estimates = [[reps[g * R + r].estimate for r in range(R)] for g in range(G)]
    groups = []
    failures = 0
    for g in range(G):
        ok = [e for e in estimates[g] if e is not None]
        failures += R - len(ok)
        if ok:
            groups.append(np.array(ok))
    ratio = anova_within_ratio(groups) if groups else []
    return McErrorReport(model=model_name, G=G, R=R, ratio=np.asarray(ratio).tolist(),
                         failures=failures, estimates=estimates)


# -- persistence ----------------------------------------------------------------

def write_result(obj, path):
    """JSON for a result or report; ``.csv`` paths get the trace (FitResult only)."""
    path = os.fspath(path)
    if path.endswith(".csv"):
        if not isinstance(obj, FitResult):
            raise TypeError("CSV output is only defined for FitResult traces")
        write_trace_csv(obj, path)
        return
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj.to_dict(), fh, indent=1)
        fh.write("\n")


def read_result(path) -> FitResult:
    with open(path, encoding="utf-8") as fh:
        return FitResult.from_dict(json.load(fh))


def write_trace_csv(result: FitResult, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "phase", "rho", "L", "accepted", "g_norm"])
        for r in result.trace:
            w.writerow(["" if v is None else v for v in (r.k, r.phase, r.rho, r.fit_size, r.accepted, r.g_norm)])


def write_scores_csv(result: FitResult, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stat_index", "score"])
        for i, s in enumerate(np.asarray(result.std_scores)):
            w.writerow([i, repr(float(s))])
