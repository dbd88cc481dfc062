"""Propensity and outcome nuisance fits, clever covariates, pseudo-outcomes."""

import numpy as np
import pytest
from scipy.special import expit

from mratio.nuisance import (FitError, OutcomeConfig, PropensityConfig,
                             clever_covariates, fit_outcome, fit_propensity,
                             pseudo_outcomes)


class TestFitPropensity:
    def test_balanced_intercept_only(self):
        X = np.zeros((8, 1))
        A = np.array([0, 1] * 4)
        model = fit_propensity(X, A)
        assert np.allclose(model.predict(X), 0.5, atol=1e-6)

    def test_symmetric_no_association(self):
        X = np.array([[-1.0], [-1.0], [1.0], [1.0]])
        A = np.array([0, 1, 0, 1])
        model = fit_propensity(X, A)
        assert np.allclose(model.beta, 0.0, atol=1e-6)
        assert np.allclose(model.predict(X), 0.5, atol=1e-6)

    def test_recovers_generating_slope(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal(10000)
        A = (rng.uniform(size=10000) < expit(2.0 * x)).astype(int)
        model = fit_propensity(x[:, None], A)
        assert abs(model.beta[1] - 2.0) < 0.1

    def test_loglik_nondecreasing(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((300, 3))
        A = (rng.uniform(size=300) < expit(X @ [1.0, -0.5, 0.2])).astype(int)
        model = fit_propensity(X, A)
        path = np.asarray(model.loglik_path)
        assert path.size >= 2
        assert np.all(np.diff(path) >= -1e-10)

    def test_single_arm_raises(self):
        X = np.zeros((5, 1))
        with pytest.raises(FitError):
            fit_propensity(X, np.ones(5, dtype=int))

    def test_separation_falls_back_to_ridge(self):
        # perfectly separable: unpenalized MLE diverges
        x = np.array([-2.0, -1.0, -0.5, 0.5, 1.0, 2.0])
        A = (x > 0).astype(int)
        model = fit_propensity(x[:, None], A)
        assert np.all(np.isfinite(model.beta))
        p = model.predict(x[:, None])
        assert np.all((p > 0) & (p < 1))

    def test_always_on_ridge_shrinks_coefficients(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((200, 4))
        A = (rng.uniform(size=200) < expit(X @ [2.0, 1.0, -1.0, 0.5])).astype(int)
        mle = fit_propensity(X, A)
        pen = fit_propensity(X, A, PropensityConfig(ridge=5.0))
        assert (np.linalg.norm(pen.beta[1:])
                < np.linalg.norm(mle.beta[1:]))
        p = pen.predict(X)
        assert np.all((p > 0) & (p < 1))

    def test_ridge_tames_separation(self):
        # perfectly separable: the penalized fit converges directly
        x = np.array([-2.0, -1.0, -0.5, 0.5, 1.0, 2.0])
        A = (x > 0).astype(int)
        model = fit_propensity(x[:, None], A, PropensityConfig(ridge=1.0))
        assert np.all(np.isfinite(model.beta))
        assert np.max(np.abs(model.beta)) < 30.0

    def test_clipping(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(500) * 3
        A = (rng.uniform(size=500) < expit(3 * x)).astype(int)
        model = fit_propensity(x[:, None], A,
                               PropensityConfig(clip_eps=0.05))
        p = model.predict(x[:, None] * 10)
        assert p.min() >= 0.05 - 1e-12 and p.max() <= 0.95 + 1e-12


class TestFitOutcome:
    def test_constant_target(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((30, 2))
        Y = np.full(30, 3.0)
        A = np.arange(30) % 2
        pair = fit_outcome(X, Y, A)
        assert np.allclose(pair.predict0(X), 3.0, atol=1e-6)
        assert np.allclose(pair.predict1(X), 3.0, atol=1e-6)

    def test_exact_linear_recovery(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(40)
        A = np.arange(40) % 2
        Y = 2.0 * x + 5.0 * A
        pair = fit_outcome(x[:, None], Y, A, OutcomeConfig(ridge_lambda=0.0))
        grid = np.linspace(-2, 2, 9)[:, None]
        assert np.allclose(pair.predict0(grid), 2.0 * grid[:, 0], atol=1e-8)
        assert np.allclose(pair.predict1(grid), 2.0 * grid[:, 0] + 5.0,
                           atol=1e-8)

    def test_residual_orthogonality(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((60, 3))
        A = np.arange(60) % 2
        Y = X @ [1.0, -2.0, 0.5] + rng.standard_normal(60)
        pair = fit_outcome(X, Y, A, OutcomeConfig(ridge_lambda=0.0))
        mask = A == 0
        resid = Y[mask] - pair.predict0(X[mask])
        assert np.max(np.abs(X[mask].T @ resid)) < 1e-8 * 60

    def test_ffnn_deterministic(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((120, 2))
        A = np.arange(120) % 2
        Y = np.sin(X[:, 0]) + rng.standard_normal(120) * 0.1
        cfg = OutcomeConfig(learner="ffnn", ffnn_epochs=20)
        a = fit_outcome(X, Y, A, cfg)
        b = fit_outcome(X, Y, A, cfg)
        grid = rng.standard_normal((10, 2))
        assert np.array_equal(a.predict0(grid), b.predict0(grid))
        assert np.array_equal(a.predict1(grid), b.predict1(grid))

    def test_ffnn_beats_ridge_on_nonlinear_truth(self):
        rng = np.random.default_rng(7)
        n = 2000
        X = rng.standard_normal((n, 2))
        A = (np.arange(n) % 2).astype(int)
        f = np.sin(2.0 * X[:, 0]) + X[:, 1] ** 2
        Y = f + 0.1 * rng.standard_normal(n)
        ffnn = fit_outcome(X, Y, A, OutcomeConfig(learner="ffnn"))
        ridge = fit_outcome(X, Y, A, OutcomeConfig(learner="ridge"))
        mask = A == 0
        rmse_f = np.sqrt(np.mean((ffnn.predict0(X[mask]) - Y[mask]) ** 2))
        rmse_r = np.sqrt(np.mean((ridge.predict0(X[mask]) - Y[mask]) ** 2))
        assert rmse_f < rmse_r

    def test_small_arm_errors(self):
        X = np.zeros((4, 5))
        Y = np.zeros(4)
        A = np.array([0, 0, 1, 1])
        with pytest.raises(FitError):
            fit_outcome(X, Y, A, OutcomeConfig(learner="ridge"))
        with pytest.raises(FitError):
            fit_outcome(X, Y, A, OutcomeConfig(learner="ffnn"))

    def test_zero_learner(self):
        X = np.ones((6, 1))
        pair = fit_outcome(X, np.arange(6.0), np.arange(6) % 2,
                           OutcomeConfig(learner="zero"))
        assert np.all(pair.predict0(X) == 0.0)
        assert np.all(pair.predict1(X) == 0.0)


class TestCleverCovariates:
    def test_hand_values(self):
        A = np.array([1, 0, 1])
        pi = np.array([0.1, 0.1, 0.5])
        h = clever_covariates(A, pi)
        assert np.allclose(h, [10.0, -1.0 / 0.9, 2.0])

    def test_sign_and_magnitude_structure(self):
        rng = np.random.default_rng(8)
        A = rng.integers(0, 2, 50)
        pi = rng.uniform(0.05, 0.95, 50)
        h = clever_covariates(A, pi)
        assert np.all((h > 0) == (A == 1))
        expected = np.where(A == 1, 1.0 / pi, 1.0 / (1.0 - pi))
        assert np.allclose(np.abs(h), expected)

    def test_domain_error_names_row(self):
        with pytest.raises(ValueError, match="row 1"):
            clever_covariates(np.array([1, 0]), np.array([0.5, 1.0]))


class TestPseudoOutcomes:
    def test_hand_values(self):
        y = pseudo_outcomes(np.array([2.0]), np.array([0.5]),
                            np.array([1.0]), np.array([3.0]))
        assert np.allclose(y, [0.0])
        y = pseudo_outcomes(np.array([1.0]), np.array([0.8]),
                            np.array([0.0]), np.array([1.0]))
        assert np.allclose(y, [0.8])

    def test_equal_mus_shift(self):
        Y = np.array([1.0, 2.0, 3.0])
        pi = np.array([0.2, 0.5, 0.9])
        c = np.full(3, 7.0)
        assert np.allclose(pseudo_outcomes(Y, pi, c, c), Y - 7.0)

    def test_linearity_in_Y(self):
        rng = np.random.default_rng(9)
        Y1, Y2 = rng.standard_normal(20), rng.standard_normal(20)
        pi = rng.uniform(0.1, 0.9, 20)
        mu0, mu1 = rng.standard_normal(20), rng.standard_normal(20)
        lhs = pseudo_outcomes(Y1 + Y2, pi, mu0, mu1)
        rhs = pseudo_outcomes(Y1, pi, mu0, mu1) + Y2
        assert np.allclose(lhs, rhs)

    def test_cross_pairing_is_deliberate(self):
        # pi multiplies mu0 (not mu1): Y* = Y - [pi*mu0 + (1-pi)*mu1]
        y = pseudo_outcomes(np.array([0.0]), np.array([0.9]),
                            np.array([10.0]), np.array([0.0]))
        assert np.allclose(y, [-9.0])
