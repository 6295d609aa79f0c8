import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from salasso.model import C_U, LinearDataset, SolverConfig, WeightVector
from salasso.prox import (
    MaxIterationsExceeded,
    NegativeLambda,
    NegativeThreshold,
    check_kkt,
    fit_weighted_lasso,
    lambda_max,
    objective,
    soft_threshold,
    soft_threshold_derivative,
)

from conftest import random_dataset


def test_soft_threshold_values():
    assert soft_threshold(3.0, 0.8) == pytest.approx(2.2)
    assert soft_threshold(-0.5, 0.8) == 0.0
    np.testing.assert_allclose(soft_threshold([-2.0, 0.1, 2.0], 1.0), [-1.0, 0.0, 1.0])
    with pytest.raises(NegativeThreshold):
        soft_threshold(1.0, -1.0)


def test_soft_threshold_derivative_kink_is_zero():
    assert soft_threshold_derivative(1.0, 1.0) == 0.0
    assert soft_threshold_derivative(1.5, 1.0) == 1.0


@given(st.floats(-50, 50), st.floats(0, 20))
def test_soft_threshold_is_prox_of_abs(x, theta):
    # prox property: minimiser of (b - x)^2 / 2 + theta |b|
    b = soft_threshold(x, theta)
    grid = b + np.linspace(-1, 1, 201)
    vals = 0.5 * (grid - x) ** 2 + theta * np.abs(grid)
    assert 0.5 * (b - x) ** 2 + theta * abs(b) <= vals.min() + 1e-9


def test_orthogonal_design_oracle():
    ds = LinearDataset(np.array([3.0, 0.5]), np.eye(2))
    fit = fit_weighted_lasso(ds, [1.0, 1.0], 0.4)
    # n = 2 so the per-coordinate threshold is n * lam * w = 0.8
    np.testing.assert_allclose(fit.beta, [2.2, 0.0], atol=1e-12)


def test_zero_at_lambda_max(rng):
    ds = random_dataset(rng)
    w = rng.uniform(0.5, 2, ds.p)
    lm = lambda_max(ds, w)
    assert np.all(fit_weighted_lasso(ds, w, lm * 1.0000001).beta == 0)
    assert np.any(fit_weighted_lasso(ds, w, lm * 0.99).beta != 0)


def test_capped_weight_forces_zero(rng):
    ds = random_dataset(rng)
    w = np.ones(ds.p)
    w[:10] = C_U
    fit = fit_weighted_lasso(ds, WeightVector(w), 1e-3)
    assert np.all(fit.beta[:10] == 0)
    assert fit.kkt_residual <= 1e-7


def test_negative_lambda():
    with pytest.raises(NegativeLambda):
        fit_weighted_lasso(LinearDataset(np.zeros(2), np.eye(2)), None, -1.0)


def _qp_oracle(ds, w, lam):
    cp = pytest.importorskip("cvxpy")
    b = cp.Variable(ds.p)
    obj = cp.sum_squares(ds.y - ds.X @ b) / (2 * ds.n) + lam * cp.sum(cp.multiply(w, cp.abs(b)))
    prob = cp.Problem(cp.Minimize(obj))
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return prob.value


@pytest.mark.parametrize("seed", range(5))
def test_matches_qp_oracle(seed):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, n=30, p=50)
    w = rng.uniform(0.1, 10, ds.p)
    lam = 0.05 * lambda_max(ds, w)
    fit = fit_weighted_lasso(ds, w, lam, SolverConfig(tol=1e-10))
    ref = _qp_oracle(ds, w, lam)
    assert fit.objective <= ref + 1e-8
    assert fit.objective == pytest.approx(ref, rel=1e-6)


def test_objective_history_monotone(rng):
    ds = random_dataset(rng)
    fit = fit_weighted_lasso(ds, None, 0.01 * lambda_max(ds))
    h = fit.objective_history
    assert h.size >= 1
    assert np.all(np.diff(h) <= 1e-12 * max(1.0, abs(h[0])))
    assert objective(ds, np.ones(ds.p), 0.01 * lambda_max(ds), fit.beta) == pytest.approx(fit.objective)


def test_warm_start_reaches_same_solution(rng):
    ds = random_dataset(rng)
    lam = 0.1 * lambda_max(ds)
    cold = fit_weighted_lasso(ds, None, lam, SolverConfig(tol=1e-10))
    warm = fit_weighted_lasso(ds, None, lam, SolverConfig(tol=1e-10), warm_start=rng.standard_normal(ds.p))
    np.testing.assert_allclose(warm.beta, cold.beta, atol=1e-7)


def test_deterministic(rng):
    ds = random_dataset(rng)
    a = fit_weighted_lasso(ds, None, 0.02)
    b = fit_weighted_lasso(ds, None, 0.02)
    assert np.array_equal(a.beta, b.beta)


def test_iteration_cap_warns(rng):
    ds = random_dataset(rng, n=30, p=80)
    with pytest.warns(MaxIterationsExceeded):
        fit = fit_weighted_lasso(ds, None, 1e-6, SolverConfig(tol=1e-14, max_iter=2))
    assert not fit.converged


def test_kkt_of_nonsolution_is_positive(rng):
    ds = random_dataset(rng)
    assert check_kkt(ds, np.ones(ds.p), 0.01, np.zeros(ds.p)) > 0
