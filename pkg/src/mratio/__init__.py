"""Outcome-weighted average treatment effect estimation.

Implements IPW and AIPW baselines alongside the outcome-weighted MR and AMR
estimators, with cross-fitting, kernel-ridge weight regression, confidence
intervals, closed-form Gaussian oracles, diagnostics, and a Monte Carlo
benchmarking harness.
"""

from .dataset import (FoldAssignment, ObservationSet, load_observations,
                      make_folds, write_observations)
from .estimators import (EstimateReport, EstimatorConfig, estimate_aipw,
                         estimate_amr, estimate_att_atc, estimate_ipw,
                         estimate_mr, estimate_policy_value, estimator_suite)
from .inference import (ConfidenceInterval, conservative_interval,
                        efficient_interval, influence_variance, wald_interval)
from .nuisance import (NuisanceFit, OutcomeConfig, PropensityConfig,
                       clever_covariates, fit_outcome, fit_propensity,
                       pseudo_outcomes)
from .synthlab import (GaussianDesign, OracleWeightTable, SimulationConfig,
                       generate_gaussian_example, generate_synthetic,
                       oracle_estimates, oracle_weight_table,
                       point_mass_design)
from .weightfit import (CrossValidationPlan, WeightModel, fit_weight_model,
                        median_heuristic_bandwidth)

__version__ = "0.1.0"

__all__ = [
    "ConfidenceInterval", "CrossValidationPlan", "EstimateReport",
    "EstimatorConfig", "FoldAssignment", "GaussianDesign", "NuisanceFit",
    "ObservationSet", "OracleWeightTable", "OutcomeConfig",
    "PropensityConfig", "SimulationConfig", "WeightModel",
    "clever_covariates", "conservative_interval", "efficient_interval",
    "estimate_aipw", "estimate_amr", "estimate_att_atc", "estimate_ipw",
    "estimate_mr", "estimate_policy_value", "estimator_suite",
    "fit_outcome", "fit_propensity", "fit_weight_model",
    "generate_gaussian_example", "generate_synthetic", "influence_variance",
    "load_observations", "make_folds", "median_heuristic_bandwidth",
    "oracle_estimates", "oracle_weight_table", "point_mass_design",
    "pseudo_outcomes", "wald_interval", "write_observations",
]
