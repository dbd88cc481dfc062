"""ATE estimators: IPW and AIPW baselines, the cross-fitted outcome-weighted
MR/AMR estimators, and ATT/ATC and policy-value variants.

All estimators report a per-unit contribution vector whose arithmetic mean is
the point estimate. The cross-fitted procedures share one fold-wise nuisance
pass when run through :func:`estimator_suite`, so method comparisons use
identical propensity and outcome fits.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import FoldAssignment, ObservationSet, make_folds
from .nuisance import (FitError, NuisanceFit, OutcomeConfig, PropensityConfig,
                       clever_covariates, fit_outcome, fit_propensity,
                       pseudo_outcomes)
from .weightfit import CrossValidationPlan, WeightModel, fit_weight_model


@dataclass(frozen=True)
class EstimatorConfig:
    """Shared configuration for the cross-fitted estimators."""

    folds: int = 5
    seed: int = 0
    propensity: PropensityConfig = field(default_factory=PropensityConfig)
    outcome: OutcomeConfig = field(default_factory=OutcomeConfig)
    weights: CrossValidationPlan = field(default_factory=CrossValidationPlan)
    weight_method: str = "kernel-ridge"   # kernel-ridge | nadaraya-watson | exact


@dataclass(frozen=True)
class EstimateReport:
    """Point estimate with its per-unit contributions.

    ``theta_hat`` is always the arithmetic mean of ``contributions``.
    ``weights`` holds the per-unit multiplier (h for IPW/AIPW, the fitted
    weight for MR/AMR). AMR reports additionally carry the AIPW-style
    contributions h * Y_star used by the conservative confidence interval.
    """

    method: str
    theta_hat: float
    contributions: np.ndarray
    n: int
    K: int
    fingerprint: str
    weights: np.ndarray | None = None
    aipw_contributions: np.ndarray | None = None


def _report(method, contributions, K, fingerprint, weights=None,
            aipw_contributions=None) -> EstimateReport:
    c = np.asarray(contributions, dtype=float)
    return EstimateReport(method=method, theta_hat=float(c.mean()),
                          contributions=c, n=c.size, K=K,
                          fingerprint=fingerprint, weights=weights,
                          aipw_contributions=aipw_contributions)


def _fingerprint(cfg: EstimatorConfig) -> str:
    return hashlib.sha1(repr(cfg).encode()).hexdigest()[:12]


def estimate_ipw(data: ObservationSet, pi_hat: np.ndarray,
                 fingerprint: str = "", K: int = 1) -> EstimateReport:
    """Horvitz-Thompson style estimate: mean of h_i * Y_i."""
    h = clever_covariates(data.A, pi_hat)
    return _report("IPW", h * data.Y, K, fingerprint, weights=h)


def estimate_aipw(data: ObservationSet, fit: NuisanceFit,
                  fingerprint: str = "", K: int = 1) -> EstimateReport:
    """Augmented estimate: mean of h_i * Ystar_i (doubly robust)."""
    h = clever_covariates(data.A, fit.pi_hat)
    ystar = pseudo_outcomes(data.Y, fit.pi_hat, fit.mu0_hat, fit.mu1_hat)
    return _report("AIPW", h * ystar, K, fingerprint, weights=h)


def _exact_groupmean_model(u: np.ndarray, t: np.ndarray) -> WeightModel:
    """Exact conditional mean of t given u (group-by), as a weight model.

    Realized as Nadaraya-Watson with a vanishing bandwidth: training points
    reproduce their group mean; new points snap to the nearest group.
    """
    u = np.asarray(u, dtype=float)
    t = np.asarray(t, dtype=float)
    scale = np.ptp(u)
    gamma = 1e-9 * scale if scale > 0 else 1.0
    return WeightModel(method="nadaraya-watson", u_train=u.copy(),
                       coef=t.copy(), gamma=gamma, lam=0.0,
                       center=float(t.mean()))


def _fit_weight(u, t, cfg: EstimatorConfig, fold: int) -> WeightModel:
    if cfg.weight_method == "exact":
        return _exact_groupmean_model(u, t)
    plan_seed = int(np.random.SeedSequence((cfg.weights.seed, fold))
                    .generate_state(1)[0])
    plan = replace(cfg.weights, seed=plan_seed)
    return fit_weight_model(u, t, plan, method=cfg.weight_method)


def _fold_pairs(n: int, cfg: EstimatorConfig):
    """Yield (k, train_idx, test_idx). folds=1 means in-sample (no split)."""
    if cfg.folds == 1:
        allidx = np.arange(n)
        return [(0, allidx, allidx)]
    fa: FoldAssignment = make_folds(n, cfg.folds, cfg.seed)
    return [(k, fa.train_indices(k), fa.test_indices(k)) for k in range(fa.K)]


def _fit_fold_nuisances(data: ObservationSet, tr: np.ndarray,
                        cfg: EstimatorConfig, need_outcome: bool):
    A_tr = data.A[tr]
    if A_tr.min() == A_tr.max():
        raise FitError(
            "a training fold contains a single treatment arm; "
            "use fewer folds (smaller K) or more data")
    prop = fit_propensity(data.X[tr], A_tr, cfg.propensity)
    out = fit_outcome(data.X[tr], data.Y[tr], A_tr, cfg.outcome) \
        if need_outcome else None
    return prop, out


def _run_crossfit(data: ObservationSet, cfg: EstimatorConfig,
                  methods: tuple[str, ...]) -> dict[str, EstimateReport]:
    """One cross-fitting pass shared by every requested method."""
    need_outcome = any(m in ("AIPW", "AMR") for m in methods)
    n = data.n
    fp = _fingerprint(cfg)
    cols: dict[str, np.ndarray] = {m: np.empty(n) for m in methods}
    wts: dict[str, np.ndarray] = {m: np.empty(n) for m in methods}
    amr_aipw = np.empty(n) if "AMR" in methods else None

    for k, tr, te in _fold_pairs(n, cfg):
        prop, out = _fit_fold_nuisances(data, tr, cfg, need_outcome)
        pi_tr = prop.predict(data.X[tr])
        h_tr = clever_covariates(data.A[tr], pi_tr)
        pi_te = prop.predict(data.X[te])
        h_te = clever_covariates(data.A[te], pi_te)

        if need_outcome:
            mu0_tr, mu1_tr = out.predict0(data.X[tr]), out.predict1(data.X[tr])
            mu0_te, mu1_te = out.predict0(data.X[te]), out.predict1(data.X[te])
            ystar_tr = pseudo_outcomes(data.Y[tr], pi_tr, mu0_tr, mu1_tr)
            ystar_te = pseudo_outcomes(data.Y[te], pi_te, mu0_te, mu1_te)

        if "IPW" in methods:
            cols["IPW"][te] = h_te * data.Y[te]
            wts["IPW"][te] = h_te
        if "AIPW" in methods:
            cols["AIPW"][te] = h_te * ystar_te
            wts["AIPW"][te] = h_te
        if "MR" in methods:
            wmod = _fit_weight(data.Y[tr], h_tr, cfg, fold=k)
            w_te = wmod.evaluate(data.Y[te])
            cols["MR"][te] = w_te * data.Y[te]
            wts["MR"][te] = w_te
        if "AMR" in methods:
            wmod = _fit_weight(ystar_tr, h_tr, cfg, fold=k)
            w_te = wmod.evaluate(ystar_te)
            cols["AMR"][te] = w_te * ystar_te
            wts["AMR"][te] = w_te
            amr_aipw[te] = h_te * ystar_te

    reports = {}
    for m in methods:
        reports[m] = _report(
            m, cols[m], cfg.folds, fp, weights=wts[m],
            aipw_contributions=amr_aipw if m == "AMR" else None)
    return reports


def estimate_mr(data: ObservationSet,
                cfg: EstimatorConfig = EstimatorConfig()) -> EstimateReport:
    """Cross-fitted outcome-weighted estimate: fit the propensity per training
    fold, regress h on Y there, and average w_hat(Y_i) * Y_i on held-out
    folds. No outcome regression is needed."""
    return _run_crossfit(data, cfg, ("MR",))["MR"]


def estimate_amr(data: ObservationSet,
                 cfg: EstimatorConfig = EstimatorConfig()) -> EstimateReport:
    """Cross-fitted augmented variant: regress h on the pseudo-outcome Y*
    per training fold and average w_hat(Ystar_i) * Ystar_i on held-out folds.

    The report also records the AIPW-style contributions h_i * Ystar_i for
    the conservative confidence interval.
    """
    return _run_crossfit(data, cfg, ("AMR",))["AMR"]


def estimator_suite(data: ObservationSet,
                    cfg: EstimatorConfig = EstimatorConfig(),
                    methods: tuple[str, ...] = ("IPW", "AIPW", "MR", "AMR"),
                    ) -> list[EstimateReport]:
    """Run several estimators on one shared cross-fitted nuisance pass, so all
    reports use identical fold-wise propensity and outcome fits."""
    reports = _run_crossfit(data, cfg, tuple(methods))
    return [reports[m] for m in methods]


def estimate_att_atc(data: ObservationSet, mode: str,
                     cfg: EstimatorConfig = EstimatorConfig()) -> EstimateReport:
    """Treated- or control-group average effect via outcome-space weighting.

    ATT regresses A/pi_hat on the residual target Y - (1-pi_hat)*mu1_hat and
    averages w_hat(target)*target; ATC uses (1-A)/(1-pi_hat) and
    Y - pi_hat*mu0_hat.
    """
    if mode not in ("ATT", "ATC"):
        raise ValueError("mode must be 'ATT' or 'ATC'")
    n = data.n
    fp = _fingerprint(cfg)
    contributions = np.empty(n)
    wts = np.empty(n)
    for k, tr, te in _fold_pairs(n, cfg):
        prop, out = _fit_fold_nuisances(data, tr, cfg, need_outcome=True)
        for idx, store in ((tr, False), (te, True)):
            pi = prop.predict(data.X[idx])
            if mode == "ATT":
                target = data.Y[idx] - (1.0 - pi) * out.predict1(data.X[idx])
                ratio = data.A[idx] / pi
            else:
                target = data.Y[idx] - pi * out.predict0(data.X[idx])
                ratio = (1.0 - data.A[idx]) / (1.0 - pi)
            if not store:
                wmod = _fit_weight(target, ratio, cfg, fold=k)
            else:
                w_te = wmod.evaluate(target)
                contributions[idx] = w_te * target
                wts[idx] = w_te
    return _report(f"{mode}-AMR", contributions, cfg.folds, fp, weights=wts)


def estimate_policy_value(residuals: np.ndarray, ratio: np.ndarray,
                          cfg: EstimatorConfig = EstimatorConfig()) -> EstimateReport:
    """Off-policy value from precomputed outcome-model residuals and
    policy-to-observational propensity ratios.

    Cross-fits the univariate regression of ratio on residual and averages
    w_hat(residual_i) * residual_i. Implements the weighted-residual display
    verbatim; no plug-in outcome-model term is added.
    """
    residuals = np.asarray(residuals, dtype=float)
    ratio = np.asarray(ratio, dtype=float)
    if residuals.shape != ratio.shape:
        raise ValueError("residuals and ratio must share one length")
    if not np.all(np.isfinite(ratio)) or np.any(ratio < 0):
        raise ValueError("ratio must be finite and non-negative")
    n = residuals.size
    fp = _fingerprint(cfg)
    contributions = np.empty(n)
    wts = np.empty(n)
    for k, tr, te in _fold_pairs(n, cfg):
        wmod = _fit_weight(residuals[tr], ratio[tr], cfg, fold=k)
        w_te = wmod.evaluate(residuals[te])
        contributions[te] = w_te * residuals[te]
        wts[te] = w_te
    return _report("POLICY", contributions, cfg.folds, fp, weights=wts)
