import warnings

import numpy as np
import pytest

from salasso.amp import (
    Diverged,
    amp_lasso,
    amp_salasso_covariate,
    amp_salasso_group,
    amp_weights_covariate,
    amp_weights_group,
)
from salasso.model import C_U, LinearDataset, SolverConfig, WeightVector
from salasso.prox import check_kkt, fit_weighted_lasso
from salasso.sim import GROUP_PRESET, simulate
from salasso import state_evolution as se


@pytest.fixture(scope="module")
def instance():
    inst = simulate("group", 320, 500, 0.2, 3, recipe=GROUP_PRESET)
    return inst, LinearDataset(inst.y, inst.X)


def test_fixed_point_solves_lasso_at_implied_lambda(instance):
    inst, ds = instance
    res = amp_lasso(ds, 2.0)
    assert res.converged
    fit = fit_weighted_lasso(ds, None, res.solver_lambda(), SolverConfig(tol=1e-11))
    rel = np.linalg.norm(res.beta - fit.beta) / np.linalg.norm(fit.beta)
    assert rel < 1e-6
    assert check_kkt(ds, np.ones(ds.p), res.solver_lambda(), res.beta) < 1e-6


def test_group_amp_with_unit_omega_is_lasso_amp(instance):
    inst, ds = instance
    a = amp_lasso(ds, 1.5)
    b = amp_salasso_group(ds, inst.partition, np.ones(len(inst.partition)), 1.5)
    assert np.array_equal(a.beta, b.beta)
    c = amp_salasso_covariate(ds, np.ones(ds.p), 1.5)
    assert np.array_equal(a.beta, c.beta)


def test_weighted_fixed_point(instance):
    inst, ds = instance
    b_L = amp_lasso(ds, 1.5).beta
    omega = amp_weights_group(b_L, inst.partition, 1.0)
    res = amp_salasso_group(ds, inst.partition, np.minimum(omega, 1e6), 1.0)
    w = np.empty(ds.p)
    for block, o in zip(inst.partition, np.minimum(omega, 1e6)):
        w[block] = o
    assert check_kkt(ds, w, res.solver_lambda(), res.beta) < 1e-6


def test_tau_tracks_state_evolution():
    taus = []
    for seed in range(6):
        inst = simulate("group", 640, 1000, 0.2, seed, recipe=GROUP_PRESET)
        taus.append(amp_lasso(LinearDataset(inst.y, inst.X), 2.0).tau_star)
    tr = se.se_lasso(GROUP_PRESET.prior(), 0.2, 0.64, 2.0)
    assert np.mean(taus) == pytest.approx(tr.tau_star, rel=0.05)


def test_weights_group_zero_and_abs():
    w = amp_weights_group([0.0, 0.0, -2.0, 2.0], [[0, 1], [2, 3]], 1.0)
    assert w.tolist() == [C_U, 0.5]


def test_weights_covariate_constant_u():
    omega, tau = amp_weights_covariate(np.array([0.2, -0.3, 0.5]), np.zeros(3), 1.0)
    np.testing.assert_allclose(omega, 3.0, rtol=1e-9)


def test_bad_inputs(instance):
    inst, ds = instance
    with pytest.raises(ValueError):
        amp_lasso(ds, 0.0)
    with pytest.raises(ValueError):
        amp_salasso_group(ds, inst.partition, np.ones(2), 1.0)
    with pytest.raises(ValueError):
        amp_salasso_covariate(ds, np.ones(3), 1.0)


def test_divergence_detected():
    rng = np.random.default_rng(0)
    n, p = 20, 400
    X = rng.standard_normal((n, p)) / np.sqrt(n)
    y = X @ rng.normal(0, 5, p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(Diverged):
            amp_lasso(LinearDataset(y, X), 0.05, max_iter=2000)
