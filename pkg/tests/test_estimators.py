"""Estimation core checked against independent solvers.

The least-squares oracle solves the normal equations directly; the
Poisson oracle is a damped Newton iteration on the explicit score and
Hessian, started from zero. Both take a different numerical path from
the production code (which uses orthogonal decompositions and a
log-mean warm start).
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from talentflow.estimators import (
    ConvergenceError,
    DesignMatrix,
    RankDeficiencyError,
    SeparationError,
    add_fixed_effects,
    fit_glm_poisson,
    fit_ols,
    with_twoway_cluster,
)


def make_design(x, y, columns=None, labels_a=None, labels_b=None) -> DesignMatrix:
    n = len(y)
    return DesignMatrix(
        x=x,
        columns=columns or [f"c{j}" for j in range(x.shape[1])],
        y=y,
        cluster_origin=labels_a if labels_a is not None else np.arange(n),
        cluster_dest=labels_b if labels_b is not None else np.arange(n),
    )


def random_design(seed=0, n=50, k=4, poisson=False):
    rng = np.random.default_rng(seed)
    x = np.column_stack([np.ones(n), rng.normal(size=(n, k - 1))])
    columns = ["intercept"] + [f"x{j}" for j in range(1, k)]
    beta = rng.normal(scale=0.5, size=k)
    eta = x @ beta
    if poisson:
        y = rng.poisson(np.exp(eta)).astype(float)
        if not np.any(y > 0):
            y[0] = 1.0
    else:
        y = eta + rng.normal(size=n)
    return make_design(x, y, columns)


def newton_poisson_oracle(x, y, tol=1e-12, max_iter=200):
    """Damped Newton on the exact score/Hessian, cold start at zero."""
    beta = np.zeros(x.shape[1])
    for _ in range(max_iter):
        eta = x @ beta
        mu = np.exp(eta)
        score = x.T @ (y - mu)
        hessian = x.T @ (x * mu[:, None])
        step = np.linalg.solve(hessian, score)
        loglik = y @ eta - mu.sum()
        scale = 1.0
        for _ in range(60):
            candidate = beta + scale * step
            mu_c = np.exp(x @ candidate)
            if y @ (x @ candidate) - mu_c.sum() >= loglik:
                break
            scale /= 2.0
        beta = beta + scale * step
        if np.max(np.abs(scale * step)) < tol:
            break
    return beta


class TestOls:
    def test_matches_normal_equations(self):
        design = random_design(seed=1)
        fit = fit_ols(design)
        oracle = np.linalg.solve(design.x.T @ design.x, design.x.T @ design.y)
        assert np.allclose(fit.beta, oracle, atol=1e-10, rtol=0)

    def test_residuals_orthogonal_to_design(self):
        design = random_design(seed=2)
        fit = fit_ols(design)
        assert np.max(np.abs(design.x.T @ fit.residuals)) < 1e-8

    def test_intercept_only_is_mean(self):
        y = np.array([1.0, 2.0, 6.0, 7.0])
        design = make_design(np.ones((4, 1)), y, ["intercept"])
        fit = fit_ols(design)
        assert fit.beta[0] == pytest.approx(y.mean(), abs=1e-12)

    def test_rank_deficiency_names_offender(self):
        rng = np.random.default_rng(3)
        base = rng.normal(size=(30, 2))
        x = np.column_stack([np.ones(30), base, base[:, 0] + base[:, 1]])
        design = make_design(x, rng.normal(size=30), ["intercept", "a", "b", "a_plus_b"])
        with pytest.raises(RankDeficiencyError) as err:
            fit_ols(design)
        assert "a_plus_b" in err.value.columns

    def test_classical_covariance_scale(self):
        design = random_design(seed=4)
        fit = fit_ols(design)
        x, resid = design.x, fit.residuals
        sigma2 = resid @ resid / (len(resid) - x.shape[1])
        oracle = sigma2 * np.linalg.inv(x.T @ x)
        assert np.allclose(fit.cov, oracle, rtol=1e-8)


class TestPoisson:
    def test_intercept_only_log_mean(self):
        y = np.array([0.0, 3.0, 1.0, 7.0, 0.0, 4.0])
        design = make_design(np.ones((6, 1)), y, ["intercept"])
        fit = fit_glm_poisson(design)
        assert abs(fit.beta[0] - math.log(y.mean())) < 1e-10

    def test_matches_newton_oracle(self):
        design = random_design(seed=5, n=50, k=4, poisson=True)
        fit = fit_glm_poisson(design)
        oracle = newton_poisson_oracle(design.x, design.y)
        assert np.max(np.abs(fit.beta - oracle)) < 1e-8

    def test_score_equations_hold(self):
        design = random_design(seed=6, n=80, k=4, poisson=True)
        fit = fit_glm_poisson(design)
        score = design.x.T @ (design.y - fit.fitted)
        scale = 1.0 + np.abs(design.x).T @ fit.fitted
        assert np.max(np.abs(score) / scale) < 1e-9

    def test_zero_outcomes_kept(self):
        design = random_design(seed=7, n=60, k=3, poisson=True)
        assert np.any(design.y == 0)
        fit = fit_glm_poisson(design)
        assert fit.n_obs == 60

    def test_scale_equivariance(self):
        design = random_design(seed=8, n=70, k=4, poisson=True)
        design.y[design.y == 0] = 0.0  # outcome need not be integer for the scaled run
        fit = fit_glm_poisson(design)
        scaled = make_design(design.x, design.y * 1000.0, list(design.columns))
        fit_scaled = fit_glm_poisson(scaled)
        assert abs(fit_scaled.beta[0] - fit.beta[0] - math.log(1000.0)) < 1e-6
        assert np.max(np.abs(fit_scaled.beta[1:] - fit.beta[1:])) < 1e-6
        se = with_twoway_cluster(fit, design).se
        se_scaled = with_twoway_cluster(fit_scaled, scaled).se
        assert np.max(np.abs(se_scaled[1:] - se[1:]) / se[1:]) < 1e-6

    def test_separation_detected_and_named(self):
        rng = np.random.default_rng(9)
        n = 40
        dummy = np.zeros(n)
        dummy[:8] = 1.0
        y = rng.poisson(2.0, n).astype(float)
        y[:8] = 0.0
        x = np.column_stack([np.ones(n), rng.normal(size=n), dummy])
        design = make_design(x, y, ["intercept", "x1", "bad_dummy"])
        with pytest.raises(SeparationError, match="bad_dummy"):
            fit_glm_poisson(design)

    def test_convergence_error_carries_trace(self):
        design = random_design(seed=10, n=50, k=4, poisson=True)
        with pytest.raises(ConvergenceError) as err:
            fit_glm_poisson(design, max_iter=1)
        assert len(err.value.trace) == 1

    def test_negative_outcome_rejected(self):
        design = make_design(np.ones((3, 1)), np.array([1.0, -1.0, 2.0]), ["intercept"])
        with pytest.raises(ValueError):
            fit_glm_poisson(design)

    def test_pvalues_and_stars(self):
        design = random_design(seed=12, n=200, k=3, poisson=True)
        fit = fit_glm_poisson(design)
        for name in fit.columns:
            p = fit.pvalue(name)
            assert 0.0 <= p <= 1.0
            z = abs(fit.coef(name)) / fit.coef_se(name)
            assert p == pytest.approx(math.erfc(z / math.sqrt(2)), rel=1e-12)
        strong = make_design(np.ones((4, 1)), np.array([5.0, 5.0, 5.0, 5.0]), ["intercept"])
        strong_fit = fit_glm_poisson(strong)
        assert strong_fit.stars("intercept") == "***"


class TestFixedEffects:
    def test_zero_outcome_group_dropped(self):
        rng = np.random.default_rng(13)
        n = 30
        groups = np.array(["G1"] * 10 + ["G2"] * 10 + ["G3"] * 10)
        y = rng.poisson(3.0, n).astype(float)
        y[groups == "G2"] = 0.0
        x = np.column_stack([np.ones(n), rng.normal(size=n)])
        design = DesignMatrix(x, ["intercept", "x1"], y, np.arange(n), groups)
        fe = add_fixed_effects(design, group="destination")
        assert fe.fe_info.dropped_groups == ["G2"]
        assert fe.fe_info.dropped_rows == 10
        assert fe.fe_info.reference == "G1"
        assert fe.columns == ["intercept", "x1", "fe_G3"]
        assert fe.n_obs == 20

    def test_group_constant_columns_dropped(self):
        rng = np.random.default_rng(14)
        n = 24
        groups = np.repeat(["A", "B", "C"], 8)
        per_group = {"A": 1.5, "B": -0.5, "C": 2.0}
        group_level = np.array([per_group[g] for g in groups])
        x = np.column_stack([np.ones(n), rng.normal(size=n), group_level])
        y = rng.poisson(2.0, n).astype(float) + 1.0
        design = DesignMatrix(x, ["intercept", "x1", "dest_trait"], y, np.arange(n), groups)
        fe = add_fixed_effects(design)
        assert fe.fe_info.dropped_columns == ["dest_trait"]
        assert fe.columns == ["intercept", "x1", "fe_B", "fe_C"]

    def test_single_group_needs_no_dummies(self):
        rng = np.random.default_rng(15)
        n = 12
        x = np.column_stack([np.ones(n), rng.normal(size=n)])
        y = rng.poisson(2.0, n).astype(float) + 1.0
        design = DesignMatrix(x, ["intercept", "x1"], y, np.arange(n), np.repeat("only", n))
        fe = add_fixed_effects(design)
        assert fe.columns == ["intercept", "x1"]
        assert np.array_equal(fe.x, design.x)

    def test_fe_fit_matches_group_totals(self):
        # the score equation for each dummy forces fitted sums to match outcomes
        rng = np.random.default_rng(16)
        n = 60
        groups = np.repeat([f"D{i}" for i in range(5)], 12)
        x = np.column_stack([np.ones(n), rng.normal(size=n)])
        y = rng.poisson(np.exp(0.3 * x[:, 1] + rng.normal(0, 0.4, n))).astype(float)
        y[:3] += 1  # keep every group nonzero
        design = DesignMatrix(x, ["intercept", "x1"], y, np.arange(n), groups)
        fe = add_fixed_effects(design)
        fit = fit_glm_poisson(fe)
        for group in np.unique(groups):
            mask = fe.cluster_dest == group
            assert fit.fitted[mask].sum() == pytest.approx(fe.y[mask].sum(), rel=1e-8)

    def test_all_groups_zero_rejected(self):
        design = DesignMatrix(
            np.ones((4, 1)), ["intercept"], np.zeros(4), np.arange(4), np.repeat("G", 4)
        )
        with pytest.raises(Exception, match="all-zero"):
            add_fixed_effects(design)

    def test_unknown_dimension_rejected(self):
        design = make_design(np.ones((3, 1)), np.ones(3), ["intercept"])
        with pytest.raises(ValueError):
            add_fixed_effects(design, group="season")


class TestDesignValidation:
    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError, match="unique"):
            make_design(np.ones((3, 2)), np.ones(3), ["a", "a"])

    def test_all_zero_column_rejected(self):
        x = np.column_stack([np.ones(3), np.zeros(3)])
        with pytest.raises(ValueError, match="all-zero"):
            make_design(x, np.ones(3), ["intercept", "dead"])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="outcome"):
            DesignMatrix(np.ones((3, 1)), ["intercept"], np.ones(4), np.arange(3), np.arange(3))

    def test_non_finite_rejected(self):
        x = np.ones((3, 1))
        with pytest.raises(ValueError, match="non-finite"):
            make_design(x, np.array([1.0, np.nan, 2.0]), ["intercept"])
