import numpy as np
import pytest

from salasso.fit import (
    FoldTooSmall,
    cross_validate,
    default_lambda_grid,
    fit_salasso,
    fold_assignment,
    joint_objective,
    log_g,
    select_point,
)
from salasso.model import C_U, LinearDataset, SolverConfig, StructureSpec
from salasso.prox import fit_weighted_lasso, lambda_max
from salasso.weights import update_weights_unstructured

from conftest import random_dataset


def test_log_g_branches():
    assert log_g(np.e, 1.0) == pytest.approx(1.0)
    assert log_g(4.0, 0.5) == pytest.approx(4.0**-1 / -1.0)


def test_t1_unstructured_is_adaptive_lasso(rng):
    ds = random_dataset(rng)
    lam = 0.05 * lambda_max(ds)
    tr = fit_salasso(ds, None, 1, lam, 1.0, SolverConfig(tol=1e-10))
    b0 = fit_weighted_lasso(ds, None, lam, SolverConfig(tol=1e-10)).beta
    w = update_weights_unstructured(b0, 1.0)
    ref = fit_weighted_lasso(ds, w, lam, SolverConfig(tol=1e-10)).beta
    np.testing.assert_allclose(tr.beta, ref, atol=1e-8)
    assert tr.T == 1 and len(tr) == 2


def test_single_group_equals_rescaled_lasso(rng):
    ds = random_dataset(rng)
    lam = 0.05 * lambda_max(ds)
    tr = fit_salasso(ds, StructureSpec.group([range(ds.p)], ds.p), 1, lam, 1.0, SolverConfig(tol=1e-11))
    w = tr[1].weights.w
    assert np.ptp(w) == 0
    ref = fit_weighted_lasso(ds, None, lam * w[0], SolverConfig(tol=1e-11)).beta
    np.testing.assert_allclose(tr.beta, ref, atol=1e-6)


def test_lambda_above_max_cascades_to_zero(rng):
    ds = random_dataset(rng)
    tr = fit_salasso(ds, StructureSpec.group([range(30), range(30, 60)], 60), 1, 1.01 * lambda_max(ds))
    assert np.all(tr[0].beta == 0)
    assert np.all(tr[1].weights.w == C_U)
    assert np.all(tr.beta == 0)


def test_joint_objective_nonincreasing(rng):
    ds = random_dataset(rng)
    tr = fit_salasso(ds, None, 5, 0.02 * lambda_max(ds), 1.0, SolverConfig(tol=1e-11))
    q = np.array([r.objective for r in tr.records])
    assert np.all(np.diff(q) <= 1e-8 * np.abs(q[:-1]).max())


def test_schedules(rng):
    ds = random_dataset(rng)
    lm = lambda_max(ds)
    tr = fit_salasso(ds, None, 2, [0.1 * lm, 0.05 * lm, 0.02 * lm], [1.0, 0.5, 0.25])
    assert [r.gamma for r in tr.records] == [1.0, 0.5, 0.25]
    with pytest.raises(ValueError):
        fit_salasso(ds, None, 2, [0.1, 0.2])
    with pytest.raises(ValueError):
        fit_salasso(ds, None, 0, 0.1)


def test_fold_assignment_partition():
    folds = fold_assignment(23, 5, seed=3)
    allidx = np.sort(np.concatenate(folds))
    assert np.array_equal(allidx, np.arange(23))
    assert {f.size for f in folds} <= {4, 5}
    assert all(np.array_equal(a, b) for a, b in zip(folds, fold_assignment(23, 5, seed=3)))


def test_fold_too_small():
    with pytest.raises(FoldTooSmall):
        fold_assignment(4, 5, 0)
    with pytest.raises(FoldTooSmall):
        fold_assignment(2, 2, 0)


def test_select_point_tie_break():
    grid = np.array([[3.0, 2.0, 1.0], [3.0, 2.0, 1.0]])
    err = np.array([[1.0, 0.5, 0.5], [0.5, 0.5, 0.5]])
    assert select_point(grid, np.array([1.0, 0.5]), err) == (1, 2)
    err2 = np.array([[1.0, 0.5, 0.6], [0.7, 0.5, 0.9]])
    assert select_point(grid, np.array([1.0, 0.5]), err2) == (1, 1)


def test_cv_matches_brute_force(rng):
    ds = random_dataset(rng, n=30, p=40)
    grid = np.geomspace(lambda_max(ds), 1e-2 * lambda_max(ds), 8)
    cfg = SolverConfig(tol=1e-11, seed=7)
    cv = cross_validate(ds, None, grid, [1.0], k=5, T=1, cfg=cfg)
    folds = fold_assignment(ds.n, 5, 7)
    # stage 0: plain lasso
    ref0 = np.empty((5, grid.size))
    fold_b = []
    for i, f in enumerate(folds):
        tr = ds.subset(np.setdiff1d(np.arange(ds.n), f))
        te = ds.subset(f)
        bs = [fit_weighted_lasso(tr, None, l, cfg).beta for l in grid]
        ref0[i] = [np.mean((te.y - te.X @ b) ** 2) for b in bs]
        fold_b.append(bs)
    np.testing.assert_allclose(cv.stages[0].fold_errors[:, 0, :], ref0, rtol=1e-6, atol=1e-12)
    li = int(np.argmin(ref0.mean(0)))
    assert cv.lambdas[0] == grid[li]
    # stage 1: weights from each fold's own stage-0 coefficients
    ref1 = np.empty((5, grid.size))
    for i, f in enumerate(folds):
        tr = ds.subset(np.setdiff1d(np.arange(ds.n), f))
        te = ds.subset(f)
        w = update_weights_unstructured(fold_b[i][li], 1.0)
        ref1[i] = [np.mean((te.y - te.X @ fit_weighted_lasso(tr, w, l, cfg).beta) ** 2) for l in grid]
    np.testing.assert_allclose(cv.stages[1].fold_errors[:, 0, :], ref1, rtol=1e-5, atol=1e-10)
    # final refit follows the chosen schedule
    ref = fit_salasso(ds, None, 1, cv.lambdas, cv.gammas, cfg)
    np.testing.assert_allclose(cv.trajectory.beta, ref.beta, atol=1e-12)


def test_cv_threads_do_not_change_result(rng):
    ds = random_dataset(rng, n=40, p=30)
    s = StructureSpec.group([range(15), range(15, 30)], 30)
    a = cross_validate(ds, s, None, [0.5, 1.0], k=4, T=2, n_lambda=10)
    b = cross_validate(ds, s, None, [0.5, 1.0], k=4, T=2, n_lambda=10, threads=3)
    assert np.array_equal(a.lambdas, b.lambdas) and np.array_equal(a.gammas, b.gammas)
    assert np.array_equal(a.trajectory.beta, b.trajectory.beta)
    assert a.lambda_grid.shape == (2, 10)


def test_cv_refine_gamma(rng):
    ds = random_dataset(rng, n=40, p=30)
    cv = cross_validate(ds, None, None, [0.5, 1.0], k=4, T=1, n_lambda=8, refine_gamma=True)
    g = cv.gammas[1]
    assert np.isclose(g * 100, round(g * 100))
    assert cv.gamma_grid.size > 2


def test_default_lambda_grid(rng):
    ds = random_dataset(rng)
    g = default_lambda_grid(ds, None, 5, 1e-2)
    assert g[0] == pytest.approx(lambda_max(ds)) and g[-1] == pytest.approx(1e-2 * g[0])
    assert np.all(np.diff(g) < 0)
