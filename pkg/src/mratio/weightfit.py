"""Univariate weight-function regression.

The outcome-weighted estimators replace the clever covariate h(A,X) by its
conditional expectation given a scalar (the outcome Y, or the pseudo-outcome
Y*). That conditional expectation is fitted here by regressing h on the
scalar with a Gaussian-kernel ridge regression (default) or Nadaraya-Watson
smoothing, with hyperparameters chosen by seeded V-fold cross-validation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .dataset import make_folds

# kernel systems above this size are solved on a seeded anchor subsample
MAX_EXACT_POINTS = 4000


class DegenerateInputError(ValueError):
    """Input has no scale (all abscissae identical)."""


@dataclass(frozen=True)
class CrossValidationPlan:
    """Hyperparameter search for the weight regression."""

    lambda_grid: tuple[float, ...] = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
    gamma_multipliers: tuple[float, ...] = (0.25, 0.5, 1.0, 2.0, 4.0)
    cv_folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if not self.lambda_grid or not self.gamma_multipliers:
            raise ValueError("hyperparameter grids must be non-empty")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")


@dataclass(frozen=True)
class WeightModel:
    """Fitted univariate regression u -> w_hat(u).

    kernel-ridge: w_hat(u) = center + sum_j alpha_j k(u, u_j);
    nadaraya-watson: kernel-weighted average of the training targets.
    """

    method: str
    u_train: np.ndarray
    coef: np.ndarray               # dual coefficients, or targets for NW
    gamma: float
    lam: float
    center: float

    def evaluate(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        if not np.all(np.isfinite(u)):
            raise ValueError("evaluation points must be finite")
        if self.u_train.size == 0:  # degenerate constant model
            out = np.full(u.shape, self.center)
        else:
            K = _gauss_kernel(u, self.u_train, self.gamma)
            if self.method == "kernel-ridge":
                out = self.center + K @ self.coef
            else:  # nadaraya-watson
                den = K.sum(axis=1)
                num = K @ self.coef
                out = np.where(den > 0, num / np.where(den > 0, den, 1.0),
                               self.center)
        return float(out[0]) if scalar else out


def _gauss_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    d = a[:, None] - b[None, :]
    return np.exp(-(d * d) / (2.0 * gamma * gamma))


def median_heuristic_bandwidth(u: np.ndarray, seed: int = 0) -> float:
    """Median of pairwise absolute gaps |u_i - u_j|, i < j.

    Exact up to 2000 points; above that, computed on a seeded subsample of
    2000 points.
    """
    u = np.asarray(u, dtype=float)
    if u.size < 2:
        raise ValueError("need at least 2 points")
    if u.size > 2000:
        rng = np.random.default_rng(seed)
        u = u[rng.choice(u.size, size=2000, replace=False)]
    i, j = np.triu_indices(u.size, k=1)
    gaps = np.abs(u[i] - u[j])
    med = float(np.median(gaps))
    if med == 0.0 and np.all(u == u[0]):
        raise DegenerateInputError("all abscissae identical; no bandwidth scale")
    if med == 0.0:
        # many ties: fall back to the smallest positive gap
        med = float(gaps[gaps > 0].min())
    return med


def _constant_model(method: str, center: float) -> WeightModel:
    return WeightModel(method=method, u_train=np.empty(0), coef=np.empty(0),
                       gamma=1.0, lam=0.0, center=center)


def _solve_krr(K: np.ndarray, y: np.ndarray, lam: float,
               lambda_grid) -> np.ndarray:
    """Solve (K + lam I) a = y; a singular lam=0 system falls back to the
    smallest positive lambda in the grid."""
    m = K.shape[0]
    try:
        c, low = cho_factor(K + lam * np.eye(m), lower=True)
        return cho_solve((c, low), y)
    except np.linalg.LinAlgError:
        positive = sorted(l for l in lambda_grid if l > 0)
        if lam > 0 or not positive:
            raise
        c, low = cho_factor(K + positive[0] * np.eye(m), lower=True)
        return cho_solve((c, low), y)


def fit_weight_model(u: np.ndarray, t: np.ndarray,
                     plan: CrossValidationPlan = CrossValidationPlan(),
                     method: str = "kernel-ridge") -> WeightModel:
    """Regress targets t on scalars u; select (lambda, bandwidth) by V-fold CV.

    Targets are centered before the kernel solve so a constant target is
    reproduced exactly and heavy-tailed targets stay numerically stable.
    """
    if method not in ("kernel-ridge", "nadaraya-watson"):
        raise ValueError(f"unknown weight method {method!r}")
    u = np.asarray(u, dtype=float)
    t = np.asarray(t, dtype=float)
    if u.shape != t.shape:
        raise ValueError("u and t must share one length")
    m = u.size
    if m < 5:
        raise ValueError("need at least 5 points to fit a weight model")
    if not np.all(np.isfinite(u)) or not np.all(np.isfinite(t)):
        raise ValueError("u and t must be finite")

    center = float(t.mean())
    if np.all(u == u[0]) or np.ptp(t) == 0.0:
        return _constant_model(method, center)

    if m > MAX_EXACT_POINTS:
        rng = np.random.default_rng(plan.seed)
        keep = np.sort(rng.choice(m, size=MAX_EXACT_POINTS, replace=False))
        u, t = u[keep], t[keep]
        m = MAX_EXACT_POINTS

    tc = t - center
    base_bw = median_heuristic_bandwidth(u, seed=plan.seed)
    gammas = [g * base_bw for g in plan.gamma_multipliers]
    folds = make_folds(m, min(plan.cv_folds, m), plan.seed)

    D2 = (u[:, None] - u[None, :]) ** 2
    lambdas = list(plan.lambda_grid) if method == "kernel-ridge" else [0.0]

    best = None  # (score, gamma, lam)
    for gamma in gammas:
        K = np.exp(-D2 / (2.0 * gamma * gamma))
        for lam in lambdas:
            sse = 0.0
            ok = True
            for k in range(folds.K):
                tr = folds.train_indices(k)
                te = folds.test_indices(k)
                K_tr = K[np.ix_(tr, tr)]
                K_te = K[np.ix_(te, tr)]
                if method == "kernel-ridge":
                    try:
                        alpha = _solve_krr(K_tr, tc[tr], lam, plan.lambda_grid)
                    except np.linalg.LinAlgError:
                        ok = False
                        break
                    pred = center + K_te @ alpha
                else:
                    den = K_te.sum(axis=1)
                    num = K_te @ t[tr]
                    pred = np.where(den > 0, num / np.where(den > 0, den, 1.0),
                                    float(t[tr].mean()))
                resid = t[te] - pred
                sse += float(resid @ resid)
            if ok and (best is None or sse < best[0]):
                best = (sse, gamma, lam)
    if best is None:
        raise np.linalg.LinAlgError("all hyperparameter cells failed to solve")
    _, gamma, lam = best

    if method == "kernel-ridge":
        K = np.exp(-D2 / (2.0 * gamma * gamma))
        alpha = _solve_krr(K, tc, lam, plan.lambda_grid)
        coef = alpha
    else:
        coef = t.copy()
    return WeightModel(method=method, u_train=u.copy(), coef=coef,
                       gamma=gamma, lam=lam, center=center)


def evaluate_weight_model(model: WeightModel, u: np.ndarray) -> np.ndarray:
    """Evaluate a fitted weight model at new points."""
    return model.evaluate(u)
