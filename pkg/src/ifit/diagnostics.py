"""Goodness-of-fit outputs at the final estimate."""

from dataclasses import dataclass

import numpy as np

from .core import DegenerateStatisticError
from .mathkit import chisq_sf, mahalanobis_sq


@dataclass
class Diagnostics:
    sh_stat: float
    sh_df: int
    sh_pvalue: float | None  # None when the model is exactly identified
    std_scores: np.ndarray


def sargan_hansen(t_obs, tau_hat, sigma_hat, p):
    """Overidentification statistic, its degrees of freedom and chi-square p-value."""
    resid = np.asarray(t_obs, dtype=float) - np.asarray(tau_hat, dtype=float)
    q = resid.size
    if q < p:
        raise ValueError("need q >= p")
    stat = float(mahalanobis_sq(resid, sigma_hat))
    df = q - p
    pvalue = chisq_sf(stat, df) if df > 0 else None
    return stat, df, pvalue


def standardized_scores(t_obs, tau_hat, sigma_hat):
    """Residuals divided by the model standard deviation of each statistic."""
    var = np.diag(np.asarray(sigma_hat, dtype=float))
    bad = np.flatnonzero(~(var > 0))
    if bad.size:
        raise DegenerateStatisticError(bad[0], f"summary statistic {bad[0]} has zero variance")
    return (np.asarray(t_obs, dtype=float) - np.asarray(tau_hat, dtype=float)) / np.sqrt(var)


def diagnose(t_obs, tau_hat, sigma_hat, p) -> Diagnostics:
    stat, df, pvalue = sargan_hansen(t_obs, tau_hat, sigma_hat, p)
    return Diagnostics(stat, df, pvalue, standardized_scores(t_obs, tau_hat, sigma_hat))
