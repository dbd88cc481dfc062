"""Nuisance models: propensity score, arm-wise outcome regressions, and the
derived per-unit quantities (clever covariate, pseudo-outcome).

The propensity model is a logistic regression fitted by iteratively
reweighted least squares with step-halving, so the log-likelihood is
non-decreasing across iterations. Outcome regressions are fitted per arm
(T-learner split): ridge-linear with an unpenalized intercept, a small
seeded feedforward network, or an identically-zero stub used to force
reduction identities in tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit


class FitError(RuntimeError):
    """Model fitting failed (single-arm data, divergence, non-convergence)."""


# expit saturates to exactly 0/1 in float for |logit| > ~37; keep evaluations
# strictly inside (0,1) so the clever covariate stays finite.
_P_FLOOR = 1e-12


@dataclass(frozen=True)
class PropensityConfig:
    max_iter: int = 100
    tol: float = 1e-8
    clip_eps: float = 0.0          # 0 disables clipping
    # always-on L2 penalty on non-intercept coefficients (0 = plain MLE)
    ridge: float = 0.0
    # separation fallback penalty, used when the primary fit diverges
    fallback_ridge: float = 1e-4
    coef_bound: float = 30.0


@dataclass(frozen=True)
class PropensityModel:
    """Fitted logistic propensity score pi_hat(x) = expit(b0 + x @ b)."""

    beta: np.ndarray               # length p+1, intercept first
    clip_eps: float = 0.0
    loglik_path: tuple[float, ...] = field(default=(), repr=False)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        p = expit(self.beta[0] + X @ self.beta[1:])
        lo = max(self.clip_eps, _P_FLOOR)
        return np.clip(p, lo, 1.0 - lo)


def _irls(X1: np.ndarray, A: np.ndarray, ridge: float, cfg: PropensityConfig):
    """IRLS with step-halving. Returns (beta, loglik path, converged flag).

    Raises FloatingPointError on a numerically singular system so the caller
    can switch to the ridge fallback.
    """
    n, d = X1.shape
    pen = np.zeros(d)
    pen[1:] = ridge  # intercept unpenalized
    beta = np.zeros(d)

    def loglik(b):
        eta = X1 @ b
        # log(1+e^eta) computed stably
        return float(A @ eta - np.logaddexp(0.0, eta).sum()
                     - 0.5 * (pen * b * b).sum())

    ll = loglik(beta)
    path = [ll]
    converged = False
    for _ in range(cfg.max_iter):
        p = expit(X1 @ beta)
        score = X1.T @ (A - p) - pen * beta
        if np.max(np.abs(score)) < cfg.tol:
            converged = True
            break
        W = p * (1.0 - p)
        H = (X1 * W[:, None]).T @ X1 + np.diag(pen)
        try:
            step = np.linalg.solve(H, score)
        except np.linalg.LinAlgError:
            raise FloatingPointError("singular IRLS system")
        # step-halving keeps the (penalized) log-likelihood non-decreasing
        t = 1.0
        for _ in range(50):
            cand = beta + t * step
            ll_new = loglik(cand)
            if ll_new >= ll - 1e-12:
                break
            t *= 0.5
        else:
            raise FloatingPointError("IRLS step-halving failed")
        beta = beta + t * step
        ll = ll_new
        path.append(ll)
        if ridge == 0.0 and np.max(np.abs(beta)) > cfg.coef_bound:
            raise FloatingPointError("coefficients diverging (separation)")
    return beta, path, converged


def fit_propensity(X: np.ndarray, A: np.ndarray,
                   cfg: PropensityConfig = PropensityConfig()) -> PropensityModel:
    """Logistic regression of A on (1, X) by IRLS.

    Under (quasi-)separation or a singular system, refits with a small L2
    penalty on the non-intercept coefficients.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    A = np.asarray(A)
    if A.min() == A.max():
        raise FitError("both treatment arms must be present to fit a propensity")
    X1 = np.column_stack([np.ones(len(A)), X])
    try:
        beta, path, converged = _irls(X1, A, cfg.ridge, cfg)
    except FloatingPointError:
        converged = False
    if not converged:
        try:
            beta, path, converged = _irls(
                X1, A, max(cfg.fallback_ridge, cfg.ridge), cfg)
        except FloatingPointError as exc:
            raise FitError(f"propensity fit failed after ridge fallback: {exc}")
        if not converged:
            raise FitError(
                "propensity IRLS did not converge after ridge fallback "
                f"(max_iter={cfg.max_iter}, tol={cfg.tol})")
    return PropensityModel(beta=beta, clip_eps=cfg.clip_eps,
                           loglik_path=tuple(path))


@dataclass(frozen=True)
class OutcomeConfig:
    learner: str = "ridge"         # ridge | ffnn | zero
    ridge_lambda: float = 1e-6
    min_arm_rows: int = 20         # ffnn only
    ffnn_widths: tuple[int, int] = (64, 64)
    ffnn_epochs: int = 200
    ffnn_batch: int = 64
    ffnn_step: float = 1e-3
    ffnn_seed: int = 0


class _RidgeLinear:
    """Linear regression with L2 penalty on standardized slopes; intercept free."""

    def __init__(self, X, y, lam):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float)
        self.mean_ = X.mean(axis=0)
        sd = X.std(axis=0)
        self.scale_ = np.where(sd > 0, sd, 1.0)
        Z = (X - self.mean_) / self.scale_
        ym = y.mean()
        d = Z.shape[1]
        G = Z.T @ Z + lam * np.eye(d)
        try:
            coef = np.linalg.solve(G, Z.T @ (y - ym))
        except np.linalg.LinAlgError:
            coef = np.linalg.lstsq(G, Z.T @ (y - ym), rcond=None)[0]
        self.coef_ = coef
        self.intercept_ = ym

    def predict(self, X):
        Z = (np.atleast_2d(np.asarray(X, dtype=float)) - self.mean_) / self.scale_
        return self.intercept_ + Z @ self.coef_


class _Feedforward:
    """Two hidden ReLU layers, linear output, seeded mini-batch SGD on MSE.

    Inputs and targets are standardized with training statistics; predictions
    are mapped back to the original scale.
    """

    def __init__(self, X, y, cfg: OutcomeConfig):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float)
        rng = np.random.default_rng(cfg.ffnn_seed)
        self.x_mean_ = X.mean(axis=0)
        xsd = X.std(axis=0)
        self.x_scale_ = np.where(xsd > 0, xsd, 1.0)
        self.y_mean_ = y.mean()
        ysd = y.std()
        self.y_scale_ = ysd if ysd > 0 else 1.0
        Z = (X - self.x_mean_) / self.x_scale_
        t = (y - self.y_mean_) / self.y_scale_

        h1, h2 = cfg.ffnn_widths
        d = Z.shape[1]
        # He initialization
        self.W1 = rng.normal(0, np.sqrt(2.0 / d), size=(d, h1))
        self.b1 = np.zeros(h1)
        self.W2 = rng.normal(0, np.sqrt(2.0 / h1), size=(h1, h2))
        self.b2 = np.zeros(h2)
        self.W3 = rng.normal(0, np.sqrt(2.0 / h2), size=(h2, 1))
        self.b3 = np.zeros(1)

        n = len(t)
        lr = cfg.ffnn_step
        for _ in range(cfg.ffnn_epochs):
            order = rng.permutation(n)
            for start in range(0, n, cfg.ffnn_batch):
                idx = order[start:start + cfg.ffnn_batch]
                zb, tb = Z[idx], t[idx]
                a1 = np.maximum(zb @ self.W1 + self.b1, 0.0)
                a2 = np.maximum(a1 @ self.W2 + self.b2, 0.0)
                out = (a2 @ self.W3 + self.b3).ravel()
                err = out - tb
                loss = float(err @ err) / len(idx)
                if not np.isfinite(loss):
                    raise FitError("non-finite loss during feedforward training")
                g_out = (2.0 / len(idx)) * err[:, None]
                gW3 = a2.T @ g_out
                gb3 = g_out.sum(axis=0)
                g2 = (g_out @ self.W3.T) * (a2 > 0)
                gW2 = a1.T @ g2
                gb2 = g2.sum(axis=0)
                g1 = (g2 @ self.W2.T) * (a1 > 0)
                gW1 = zb.T @ g1
                gb1 = g1.sum(axis=0)
                self.W3 -= lr * gW3
                self.b3 -= lr * gb3
                self.W2 -= lr * gW2
                self.b2 -= lr * gb2
                self.W1 -= lr * gW1
                self.b1 -= lr * gb1

    def predict(self, X):
        Z = (np.atleast_2d(np.asarray(X, dtype=float)) - self.x_mean_) / self.x_scale_
        a1 = np.maximum(Z @ self.W1 + self.b1, 0.0)
        a2 = np.maximum(a1 @ self.W2 + self.b2, 0.0)
        out = (a2 @ self.W3 + self.b3).ravel()
        return self.y_mean_ + self.y_scale_ * out


class _ZeroRegressor:
    def predict(self, X):
        return np.zeros(np.atleast_2d(np.asarray(X)).shape[0])


@dataclass(frozen=True)
class OutcomePair:
    """Arm-specific outcome regressions mu0_hat(.) and mu1_hat(.)."""

    learner: str
    mu0: object
    mu1: object

    def predict0(self, X) -> np.ndarray:
        return np.asarray(self.mu0.predict(X), dtype=float)

    def predict1(self, X) -> np.ndarray:
        return np.asarray(self.mu1.predict(X), dtype=float)


def fit_outcome(X: np.ndarray, Y: np.ndarray, A: np.ndarray,
                cfg: OutcomeConfig = OutcomeConfig()) -> OutcomePair:
    """Fit mu0 on control rows and mu1 on treated rows."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float)
    A = np.asarray(A)
    if cfg.learner == "zero":
        return OutcomePair("zero", _ZeroRegressor(), _ZeroRegressor())
    fits = {}
    for arm in (0, 1):
        mask = A == arm
        n_arm = int(mask.sum())
        if n_arm == 0:
            raise FitError(f"no rows with A={arm}; cannot fit outcome model")
        if cfg.learner == "ridge":
            if n_arm < X.shape[1] + 1:
                raise FitError(
                    f"arm {arm} has {n_arm} rows < p+1={X.shape[1]+1} "
                    "required for ridge-linear")
            fits[arm] = _RidgeLinear(X[mask], Y[mask], cfg.ridge_lambda)
        elif cfg.learner == "ffnn":
            if n_arm < cfg.min_arm_rows:
                raise FitError(
                    f"arm {arm} has {n_arm} rows < configured minimum "
                    f"{cfg.min_arm_rows} for feedforward learner")
            arm_cfg = replace(cfg, ffnn_seed=cfg.ffnn_seed + arm)
            fits[arm] = _Feedforward(X[mask], Y[mask], arm_cfg)
        else:
            raise ValueError(f"unknown outcome learner {cfg.learner!r}")
    return OutcomePair(cfg.learner, fits[0], fits[1])


@dataclass(frozen=True)
class NuisanceFit:
    """Fitted nuisance models plus cached evaluations on an evaluation set."""

    propensity: PropensityModel
    outcome: OutcomePair
    pi_hat: np.ndarray
    mu0_hat: np.ndarray
    mu1_hat: np.ndarray

    @classmethod
    def evaluate(cls, propensity: PropensityModel, outcome: OutcomePair,
                 X_eval: np.ndarray) -> "NuisanceFit":
        return cls(propensity=propensity, outcome=outcome,
                   pi_hat=propensity.predict(X_eval),
                   mu0_hat=outcome.predict0(X_eval),
                   mu1_hat=outcome.predict1(X_eval))


def clever_covariates(A: np.ndarray, pi_hat: np.ndarray) -> np.ndarray:
    """h_i = A_i/pi_i - (1-A_i)/(1-pi_i), the inverse-propensity contrast."""
    A = np.asarray(A, dtype=float)
    pi_hat = np.asarray(pi_hat, dtype=float)
    bad = ~((pi_hat > 0.0) & (pi_hat < 1.0))
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise ValueError(f"propensity value outside (0,1) at row {row}: "
                         f"{pi_hat[row]}")
    return A / pi_hat - (1.0 - A) / (1.0 - pi_hat)


def pseudo_outcomes(Y: np.ndarray, pi_hat: np.ndarray,
                    mu0_hat: np.ndarray, mu1_hat: np.ndarray) -> np.ndarray:
    """Y*_i = Y_i - [pi_i * mu0_i + (1 - pi_i) * mu1_i].

    The propensity deliberately multiplies the control-arm regression (and
    1-pi the treated-arm one); this cross-pairing is what makes the weighted
    average of Y* target the treatment effect, and it intentionally differs
    from E[Y|X].
    """
    Y = np.asarray(Y, dtype=float)
    pi_hat = np.asarray(pi_hat, dtype=float)
    mu0_hat = np.asarray(mu0_hat, dtype=float)
    mu1_hat = np.asarray(mu1_hat, dtype=float)
    if not (Y.shape == pi_hat.shape == mu0_hat.shape == mu1_hat.shape):
        raise ValueError("Y, pi_hat, mu0_hat, mu1_hat must share one length")
    return Y - (pi_hat * mu0_hat + (1.0 - pi_hat) * mu1_hat)
