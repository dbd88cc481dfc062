"""Synthetic data generation and closed-form oracle weights.

Two generators are provided: the benchmark DGP with instrumental, confounder,
prognostic and spurious covariate blocks, and a generic Gaussian-outcome
design (Bernoulli treatment, Gaussian potential outcomes) for which the
population weight functions have a closed form and can be tabulated by Monte
Carlo integration over the covariate law. The resulting tables serve as
independent oracles for the fitted-weight estimators.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from .dataset import ObservationSet
from .estimators import EstimateReport, _report
from .nuisance import clever_covariates, pseudo_outcomes

logger = logging.getLogger(__name__)

DENSITY_FLOOR = 1e-300  # below this the marginal density is out of support


@dataclass(frozen=True)
class SimulationConfig:
    """Benchmark DGP: iid standard-normal covariates in blocks
    (instrumental, confounder, prognostic, spurious)."""

    n: int
    p_i: int = 5
    p_c: int = 5
    p_o: int = 5
    p_s: int = 5
    effect: float = 5.0
    sigma: float = 1.0
    mu0_form: str = "paper"        # paper | linear | zero
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if min(self.p_i, self.p_c, self.p_o, self.p_s) < 0:
            raise ValueError("block sizes must be >= 0")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.mu0_form not in ("paper", "linear", "zero"):
            raise ValueError(f"unknown mu0_form {self.mu0_form!r}")

    @property
    def p(self) -> int:
        return self.p_i + self.p_c + self.p_o + self.p_s

    def covariate_names(self) -> tuple[str, ...]:
        names = [f"i{j+1}" for j in range(self.p_i)]
        names += [f"c{j+1}" for j in range(self.p_c)]
        names += [f"o{j+1}" for j in range(self.p_o)]
        names += [f"s{j+1}" for j in range(self.p_s)]
        return tuple(names)


def _blocks(X: np.ndarray, cfg: SimulationConfig):
    a = cfg.p_i
    b = a + cfg.p_c
    c = b + cfg.p_o
    return X[:, :a], X[:, a:b], X[:, b:c], X[:, c:]


def synthetic_propensity(X: np.ndarray, cfg: SimulationConfig) -> np.ndarray:
    I, C, _, _ = _blocks(X, cfg)
    return expit(I.sum(axis=1) + 0.5 * C.sum(axis=1))


def synthetic_mu0(X: np.ndarray, cfg: SimulationConfig) -> np.ndarray:
    _, C, O, _ = _blocks(X, cfg)
    s_o = O.sum(axis=1)
    s_c = C.sum(axis=1)
    if cfg.mu0_form == "paper":
        # np.pi here is the circle constant (argument of sin/cos), not the
        # propensity score
        return (10.0 * np.sin(np.pi * s_o) + 20.0 * s_o ** 2
                + (s_c * np.cos(np.pi * s_o)) ** 2)
    if cfg.mu0_form == "linear":
        return s_o + s_c
    return np.zeros(X.shape[0])


def generate_synthetic(cfg: SimulationConfig) -> tuple[ObservationSet, float]:
    """Draw (X, A, Y) from the benchmark DGP; the true ATE is cfg.effect."""
    rng = np.random.default_rng(cfg.seed)
    X = rng.standard_normal((cfg.n, cfg.p))
    pi = synthetic_propensity(X, cfg)
    A = (rng.uniform(size=cfg.n) < pi).astype(np.int64)
    mu0 = synthetic_mu0(X, cfg)
    Y = cfg.effect * A + mu0 + cfg.sigma * rng.standard_normal(cfg.n)
    data = ObservationSet(X=X, A=A, Y=Y,
                          covariate_names=cfg.covariate_names())
    return data, float(cfg.effect)


@dataclass(frozen=True)
class GaussianDesign:
    """Bernoulli treatment and Gaussian potential outcomes.

    The covariate law is either a point mass at ``point_mass`` or
    ``normal_dim`` iid standard normals. pi_fn/mu0_fn/mu1_fn map an n x d
    covariate matrix to length-n vectors.
    """

    pi_fn: Callable[[np.ndarray], np.ndarray]
    mu0_fn: Callable[[np.ndarray], np.ndarray]
    mu1_fn: Callable[[np.ndarray], np.ndarray]
    sigma: float = 1.0
    point_mass: np.ndarray | None = None
    normal_dim: int = 1

    def draw_covariates(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.point_mass is not None:
            x0 = np.atleast_1d(np.asarray(self.point_mass, dtype=float))
            return np.tile(x0, (n, 1))
        return rng.standard_normal((n, self.normal_dim))

    def true_theta(self, M: int = 10 ** 6, seed: int = 0) -> float:
        """E[mu1(X) - mu0(X)]; exact for a point mass, Monte Carlo otherwise."""
        if self.point_mass is not None:
            X = self.draw_covariates(1, np.random.default_rng(0))
            return float(self.mu1_fn(X)[0] - self.mu0_fn(X)[0])
        X = self.draw_covariates(M, np.random.default_rng(seed))
        return float(np.mean(self.mu1_fn(X) - self.mu0_fn(X)))


def point_mass_design(pi: float, mu0: float, mu1: float,
                      sigma: float = 1.0) -> GaussianDesign:
    """Design with a single covariate point and constant nuisances."""
    return GaussianDesign(
        pi_fn=lambda X: np.full(X.shape[0], pi),
        mu0_fn=lambda X: np.full(X.shape[0], mu0),
        mu1_fn=lambda X: np.full(X.shape[0], mu1),
        sigma=sigma, point_mass=np.zeros(1))


def generate_gaussian_example(design: GaussianDesign, n: int,
                              seed: int) -> tuple[ObservationSet, float]:
    """Draw n observations from a Gaussian design."""
    rng = np.random.default_rng(seed)
    X = design.draw_covariates(n, rng)
    pi = np.asarray(design.pi_fn(X), dtype=float)
    if np.any(pi <= 0) or np.any(pi >= 1):
        raise ValueError("design propensity must lie strictly inside (0,1)")
    A = (rng.uniform(size=n) < pi).astype(np.int64)
    y0 = design.mu0_fn(X) + design.sigma * rng.standard_normal(n)
    y1 = design.mu1_fn(X) + design.sigma * rng.standard_normal(n)
    Y = np.where(A == 1, y1, y0)
    return ObservationSet(X=X, A=A, Y=Y), design.true_theta()


@dataclass(frozen=True)
class OracleWeightTable:
    """Closed-form weight function tabulated on a grid.

    Evaluation interpolates linearly within the grid and clamps outside it
    (with a logged warning); grid points where the marginal density
    underflows are flagged out of support.
    """

    kind: str                      # w | w0 | wstar | wstar0
    grid: np.ndarray
    values: np.ndarray
    in_support: np.ndarray
    M: int
    seed: int

    def evaluate(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        lo, hi = self.grid[0], self.grid[-1]
        n_out = int(np.sum((u < lo) | (u > hi)))
        if n_out:
            logger.warning("%d of %d points outside the [%g, %g] grid; "
                           "clamping to the nearest endpoint",
                           n_out, u.size, lo, hi)
        g = self.grid[self.in_support]
        v = self.values[self.in_support]
        return np.interp(np.clip(u, lo, hi), g, v)

    def coverage(self, u: np.ndarray) -> float:
        u = np.asarray(u, dtype=float)
        return float(np.mean((u >= self.grid[0]) & (u <= self.grid[-1])))


def _ratio_table(grid, m1, m0, num_w1, num_w0, den_w1, den_w0, sigma,
                 chunk=32):
    """Tabulate [mean(num_w1*N(y;m1) - num_w0*N(y;m0))] /
    [mean(den_w1*N(y;m1) + den_w0*N(y;m0))] over covariate draws."""
    values = np.empty(grid.size)
    support = np.ones(grid.size, dtype=bool)
    for start in range(0, grid.size, chunk):
        g = grid[start:start + chunk, None]
        p1 = norm.pdf(g, loc=m1[None, :], scale=sigma)
        p0 = norm.pdf(g, loc=m0[None, :], scale=sigma)
        num = (num_w1 * p1 - num_w0 * p0).mean(axis=1)
        den = (den_w1 * p1 + den_w0 * p0).mean(axis=1)
        ok = den >= DENSITY_FLOOR
        sl = slice(start, start + g.size)
        support[sl] = ok
        values[sl] = np.where(ok, num / np.where(ok, den, 1.0), np.nan)
    return values, support


def oracle_weight_table(design: GaussianDesign, kind: str, grid: np.ndarray,
                        M: int = 10 ** 5, seed: int = 0,
                        pi_hat_fn=None, mu0_hat_fn=None,
                        mu1_hat_fn=None) -> OracleWeightTable:
    """Tabulate a population weight function for a Gaussian design.

    'w' / 'wstar' use the design's true nuisances; 'w0' / 'wstar0' are the
    plug-in variants and require the override functions pi_hat_fn (and, for
    'wstar0', mu0_hat_fn and mu1_hat_fn).
    """
    grid = np.asarray(grid, dtype=float)
    if not np.all(np.isfinite(grid)):
        raise ValueError("grid must be finite")
    if M < 10 ** 4:
        raise ValueError("M must be at least 1e4")
    if kind not in ("w", "w0", "wstar", "wstar0"):
        raise ValueError(f"unknown weight kind {kind!r}")
    if kind in ("w0", "wstar0") and pi_hat_fn is None:
        raise ValueError(f"kind {kind!r} requires pi_hat_fn")
    if kind == "wstar0" and (mu0_hat_fn is None or mu1_hat_fn is None):
        raise ValueError("kind 'wstar0' requires mu0_hat_fn and mu1_hat_fn")

    rng = np.random.default_rng(seed)
    X = design.draw_covariates(1 if design.point_mass is not None else M, rng)
    pi = np.asarray(design.pi_fn(X), dtype=float)
    mu0 = np.asarray(design.mu0_fn(X), dtype=float)
    mu1 = np.asarray(design.mu1_fn(X), dtype=float)

    if kind in ("w", "w0"):
        m1, m0 = mu1, mu0
    elif kind == "wstar":
        tau = mu1 - mu0
        m1, m0 = pi * tau, -(1.0 - pi) * tau
    else:  # wstar0
        pih = np.asarray(pi_hat_fn(X), dtype=float)
        mu_star_hat = (pih * np.asarray(mu0_hat_fn(X), dtype=float)
                       + (1.0 - pih) * np.asarray(mu1_hat_fn(X), dtype=float))
        m1, m0 = mu1 - mu_star_hat, mu0 - mu_star_hat

    if kind in ("w", "wstar"):
        num_w1 = np.ones_like(pi)
        num_w0 = np.ones_like(pi)
    else:
        pih = np.asarray(pi_hat_fn(X), dtype=float)
        num_w1 = pi / pih
        num_w0 = (1.0 - pi) / (1.0 - pih)

    values, support = _ratio_table(grid, m1, m0, num_w1, num_w0,
                                   pi, 1.0 - pi, design.sigma)
    return OracleWeightTable(kind=kind, grid=grid.copy(), values=values,
                             in_support=support, M=M, seed=seed)


def default_grid(u: np.ndarray, n_points: int = 201) -> np.ndarray:
    """Equally spaced grid over the 0.5%-99.5% quantiles of a regressand."""
    lo, hi = np.quantile(np.asarray(u, dtype=float), [0.005, 0.995])
    return np.linspace(lo, hi, n_points)


class CoverageError(RuntimeError):
    """Realized regressand falls outside the oracle grid too often."""


def oracle_estimates(data: ObservationSet, design: GaussianDesign,
                     tables: dict[str, OracleWeightTable] | None = None,
                     min_coverage: float = 0.99) -> list[EstimateReport]:
    """Oracle estimator reports on one dataset.

    Always reports IPW and AIPW with the design's true nuisances. For each
    provided table, reports the table-weighted estimator: 'w'/'w0' weight Y,
    'wstar' weights the true-nuisance pseudo-outcome.
    """
    tables = tables or {}
    pi = np.asarray(design.pi_fn(data.X), dtype=float)
    mu0 = np.asarray(design.mu0_fn(data.X), dtype=float)
    mu1 = np.asarray(design.mu1_fn(data.X), dtype=float)
    h = clever_covariates(data.A, pi)
    ystar = pseudo_outcomes(data.Y, pi, mu0, mu1)

    reports = [
        _report("IPW", h * data.Y, 1, "oracle", weights=h),
        _report("AIPW", h * ystar, 1, "oracle", weights=h,
                aipw_contributions=h * ystar),
    ]
    for kind, table in tables.items():
        regressand = data.Y if kind in ("w", "w0") else ystar
        cov = table.coverage(regressand)
        if cov < min_coverage:
            raise CoverageError(
                f"oracle table {kind!r} covers only {cov:.1%} of realized "
                f"points (minimum {min_coverage:.0%})")
        w = table.evaluate(regressand)
        method = "MR-oracleW" if kind in ("w", "w0") else "AMR-oracleW"
        reports.append(_report(method, w * regressand, 1, "oracle", weights=w,
                               aipw_contributions=(h * ystar if
                                                   method == "AMR-oracleW"
                                                   else None)))
    return reports
