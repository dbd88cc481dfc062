"""Estimator formulas, cross-fitting, reduction identities, extensions."""

import numpy as np
import pytest

from mratio.dataset import ObservationSet
from mratio.estimators import (EstimatorConfig, estimate_aipw,
                               estimate_att_atc, estimate_ipw,
                               estimate_policy_value, estimator_suite)
from mratio.nuisance import FitError, NuisanceFit, OutcomeConfig
from mratio.synthlab import SimulationConfig, generate_synthetic
from mratio.weightfit import CrossValidationPlan


def obs(X, A, Y):
    return ObservationSet(X=np.asarray(X, dtype=float),
                          A=np.asarray(A, dtype=np.int64),
                          Y=np.asarray(Y, dtype=float))


class TestIpw:
    def test_hand_horvitz_thompson(self):
        data = obs(np.zeros((4, 1)), [1, 0, 1, 0], [3, 1, 5, 1])
        rep = estimate_ipw(data, np.full(4, 0.5))
        assert rep.theta_hat == pytest.approx(3.0, rel=1e-12)
        assert np.allclose(rep.contributions, [6, -2, 10, -2])

    def test_zero_outcome(self):
        data = obs(np.zeros((4, 1)), [1, 0, 1, 0], np.zeros(4))
        assert estimate_ipw(data, np.full(4, 0.5)).theta_hat == 0.0

    def test_all_treated(self):
        data = obs(np.zeros((2, 1)), [1, 1], [1.0, 1.0])
        assert estimate_ipw(data, np.full(2, 0.5)).theta_hat == 2.0


class TestAipw:
    def test_hand_three_rows(self):
        data = obs(np.zeros((3, 1)), [1, 0, 1], [2, 1, 3])
        fit = NuisanceFit(propensity=None, outcome=None,
                          pi_hat=np.array([0.5, 0.25, 0.8]),
                          mu0_hat=np.array([0.0, 1.0, 1.0]),
                          mu1_hat=np.array([1.0, 2.0, 2.0]))
        rep = estimate_aipw(data, fit)
        assert np.allclose(rep.contributions, [3.0, 1.0, 2.25])
        assert rep.theta_hat == pytest.approx(6.25 / 3, rel=1e-12)

    def test_zero_mus_equals_ipw(self):
        rng = np.random.default_rng(0)
        data = obs(rng.standard_normal((10, 2)), np.arange(10) % 2,
                   rng.standard_normal(10))
        pi = rng.uniform(0.2, 0.8, 10)
        fit = NuisanceFit(propensity=None, outcome=None, pi_hat=pi,
                          mu0_hat=np.zeros(10), mu1_hat=np.zeros(10))
        assert np.array_equal(estimate_aipw(data, fit).contributions,
                              estimate_ipw(data, pi).contributions)

    def test_noiseless_exact_nuisances(self):
        rng = np.random.default_rng(1)
        n = 30
        X = rng.standard_normal((n, 1))
        A = (np.arange(n) % 2).astype(int)
        mu0 = X[:, 0]
        mu1 = X[:, 0] + 5.0
        Y = np.where(A == 1, mu1, mu0)
        fit = NuisanceFit(propensity=None, outcome=None,
                          pi_hat=np.full(n, 0.5), mu0_hat=mu0, mu1_hat=mu1)
        rep = estimate_aipw(obs(X, A, Y), fit)
        assert np.allclose(rep.contributions, 5.0, atol=1e-12)


class TestCrossFitSuite:
    def setup_method(self):
        self.data, _ = generate_synthetic(
            SimulationConfig(n=200, p_i=2, mu0_form="linear", seed=3))

    def test_reduction_identities(self):
        cfg = EstimatorConfig(folds=2, seed=0,
                              outcome=OutcomeConfig(learner="zero"))
        ipw, aipw, mr, amr = estimator_suite(self.data, cfg)
        assert np.array_equal(ipw.contributions, aipw.contributions)
        assert np.array_equal(mr.contributions, amr.contributions)
        assert aipw.theta_hat == ipw.theta_hat
        assert amr.theta_hat == mr.theta_hat

    def test_theta_is_mean_of_contributions(self):
        cfg = EstimatorConfig(folds=2)
        for rep in estimator_suite(self.data, cfg):
            assert rep.theta_hat == pytest.approx(
                float(rep.contributions.mean()), rel=1e-12)
            assert rep.contributions.size == self.data.n

    def test_determinism(self):
        cfg = EstimatorConfig(folds=2, seed=9)
        a = estimator_suite(self.data, cfg)
        b = estimator_suite(self.data, cfg)
        for ra, rb in zip(a, b):
            assert np.array_equal(ra.contributions, rb.contributions)

    def test_shared_fingerprint(self):
        cfg = EstimatorConfig(folds=2)
        fps = {r.fingerprint for r in estimator_suite(self.data, cfg)}
        assert len(fps) == 1

    def test_amr_records_aipw_contributions(self):
        cfg = EstimatorConfig(folds=2)
        reports = {r.method: r for r in estimator_suite(self.data, cfg)}
        assert reports["AMR"].aipw_contributions is not None
        assert reports["IPW"].aipw_contributions is None

    def test_single_arm_fold_error(self):
        data = obs(np.zeros((6, 1)), [1, 1, 1, 1, 1, 0], np.zeros(6))
        with pytest.raises(FitError, match="fewer folds"):
            estimator_suite(data, EstimatorConfig(folds=6), methods=("MR",))

    def test_constant_weight_degeneration(self):
        # shrinkage-limit plan: contribution_i ~= mean_train(h) * Y_i
        cfg = EstimatorConfig(
            folds=1, weights=CrossValidationPlan(lambda_grid=(1e8,)))
        reports = estimator_suite(self.data, cfg, methods=("IPW", "MR"))
        ipw, mr = reports
        hbar = ipw.weights.mean()
        assert np.allclose(mr.contributions, hbar * self.data.Y, atol=1e-4)


class TestAttAtcPolicy:
    def test_att_hand_example(self):
        data = obs(np.zeros((2, 1)), [1, 0], [2.0, 0.0])
        cfg = EstimatorConfig(folds=1, weight_method="exact",
                              outcome=OutcomeConfig(learner="zero"))
        rep = estimate_att_atc(data, "ATT", cfg)
        assert rep.theta_hat == pytest.approx(2.0, abs=1e-9)

    def test_att_zero_outcome(self):
        data = obs(np.zeros((4, 1)), [1, 0, 1, 0], np.zeros(4))
        cfg = EstimatorConfig(folds=1, weight_method="exact",
                              outcome=OutcomeConfig(learner="zero"))
        assert estimate_att_atc(data, "ATT", cfg).theta_hat == 0.0

    def test_bad_mode(self):
        data = obs(np.zeros((4, 1)), [1, 0, 1, 0], np.zeros(4))
        with pytest.raises(ValueError):
            estimate_att_atc(data, "ATE", EstimatorConfig())

    def test_policy_hand_example(self):
        cfg = EstimatorConfig(folds=1, weight_method="exact")
        rep = estimate_policy_value(np.array([1.0, -1.0]),
                                    np.array([2.0, 0.0]), cfg)
        assert rep.theta_hat == pytest.approx(1.0, abs=1e-9)

    def test_policy_identity_ratio(self):
        rng = np.random.default_rng(4)
        Y = rng.standard_normal(40)
        cfg = EstimatorConfig(folds=1, weight_method="exact")
        rep = estimate_policy_value(Y, np.ones(40), cfg)
        assert rep.theta_hat == pytest.approx(float(Y.mean()), rel=1e-9)

    def test_policy_zero_residuals(self):
        cfg = EstimatorConfig(folds=1, weight_method="exact")
        rep = estimate_policy_value(np.zeros(10), np.ones(10), cfg)
        assert rep.theta_hat == 0.0

    def test_policy_rejects_negative_ratio(self):
        with pytest.raises(ValueError):
            estimate_policy_value(np.ones(5), np.array([1, 1, -1, 1, 1.0]),
                                  EstimatorConfig())
