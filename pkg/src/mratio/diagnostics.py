"""Overlap and balance diagnostics.

Covers the per-covariate imbalance metric, per-estimator weight summaries,
and a propensity-score histogram export. All outputs are plain arrays and
records meant for CSV export and external plotting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimators import EstimateReport


@dataclass(frozen=True)
class ImbalanceProfile:
    """Per-covariate imbalance of a weight vector b against columns of X.

    The base quantity per column j is s_j = mean(b_i x_ij)^2 / mean(x_ij^2).
    The corrected convention reports s_j^(1/2) so a zero weight vector gives
    zero imbalance; the paper convention reports s_j^(-1/2), which sends zero
    weights to infinity. Columns that are identically zero are flagged
    undefined (NaN metric).
    """

    values: np.ndarray
    method: str
    convention: str                 # corrected | paper
    undefined: np.ndarray           # per-column flag: metric not computable

    @property
    def p(self) -> int:
        return self.values.size


def imbalance_profile(X: np.ndarray, b: np.ndarray,
                      convention: str = "corrected",
                      method: str = "") -> ImbalanceProfile:
    """Per-column imbalance of weights b over the covariate matrix X."""
    if convention not in ("corrected", "paper"):
        raise ValueError(f"unknown convention {convention!r}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    b = np.asarray(b, dtype=float)
    if X.shape[0] != b.size:
        raise ValueError("X and b must share one length")
    num = np.mean(b[:, None] * X, axis=0) ** 2
    den = np.mean(X * X, axis=0)
    undefined = den == 0.0
    s = np.where(undefined, np.nan, num / np.where(undefined, 1.0, den))
    with np.errstate(divide="ignore"):
        values = np.sqrt(s) if convention == "corrected" else 1.0 / np.sqrt(s)
    return ImbalanceProfile(values=values, method=method,
                            convention=convention, undefined=undefined)


_QUANTILES = (0.01, 0.05, 0.50, 0.95, 0.99)


def weight_summary(report: EstimateReport) -> dict[str, float]:
    """Distribution summary of the per-unit weights recorded by an estimator."""
    if report.weights is None:
        raise RuntimeError(
            f"report for {report.method!r} carries no per-unit weights")
    w = np.asarray(report.weights, dtype=float)
    summary = {
        "method": report.method,
        "min": float(w.min()),
        "max": float(w.max()),
        "mean": float(w.mean()),
        "mean_abs": float(np.abs(w).mean()),
    }
    for q, v in zip(_QUANTILES, np.quantile(w, _QUANTILES)):
        summary[f"q{int(round(100 * q)):02d}"] = float(v)
    return summary


def propensity_histogram(pi_hat: np.ndarray,
                         bins: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width histogram of estimated propensities on [0, 1]."""
    pi_hat = np.asarray(pi_hat, dtype=float)
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if np.any(pi_hat <= 0.0) or np.any(pi_hat >= 1.0):
        raise ValueError("propensities must lie strictly inside (0, 1)")
    counts, edges = np.histogram(pi_hat, bins=bins, range=(0.0, 1.0))
    return edges, counts
