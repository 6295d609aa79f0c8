import numpy as np
import pytest
from scipy.special import expit
from scipy.stats import norm

from salasso import state_evolution as se
from salasso.model import CovariatePrior, GroupPrior, PointNormal
from salasso.prox import soft_threshold
from salasso.sim import GROUP_PRESET


def test_zero_signal_closed_form():
    tau, theta = 0.7, 1.1
    a = theta / tau
    ref = 2 * ((tau**2 + theta**2) * norm.cdf(-a) - theta * tau * norm.pdf(a))
    assert se.risk_given_signal(0.0, tau, theta) == pytest.approx(ref, rel=1e-13)
    assert se.deta_given_signal(0.0, tau, theta) == pytest.approx(2 * norm.cdf(-a), rel=1e-13)


@pytest.mark.parametrize("comp", [PointNormal(0.3, 1.0, 0.5), PointNormal(0.9, -2.0, 0.2), PointNormal(1.0, 0.0, 1.0)])
@pytest.mark.parametrize("tau, alpha", [(0.5, 1.0), (1.2, 2.5)])
def test_expectations_match_monte_carlo(comp, tau, alpha):
    rng = np.random.default_rng(1)
    m = 400_000
    b = np.where(rng.random(m) < comp.pi, 0.0, comp.mu + comp.s * rng.standard_normal(m))
    x = b + tau * rng.standard_normal(m)
    theta = alpha * tau
    eta = soft_threshold(x, theta)
    mse_mc = np.mean((eta - b) ** 2)
    se_mc = np.std((eta - b) ** 2) / np.sqrt(m)
    assert abs(se.mse_expectation(comp, tau, theta) - mse_mc) < 5 * se_mc
    deta_mc = np.mean(np.abs(x) > theta)
    assert abs(se.deta_expectation(comp, tau, theta) - deta_mc) < 5 * np.sqrt(deta_mc * (1 - deta_mc) / m) + 1e-12
    abs_mc = np.mean(np.abs(eta))
    assert abs(se.abs_eta_expectation(comp, tau, theta) - abs_mc) < 5 * np.std(np.abs(eta)) / np.sqrt(m) + 1e-12


def test_group_with_unit_omega_is_lasso():
    prior = GROUP_PRESET.prior()
    a = se.se_lasso(prior, 0.2, 0.64, 1.7)
    b = se.se_salasso_group(prior, np.ones(prior.D), 0.2, 0.64, 1.7)
    assert a.tau_star == b.tau_star
    assert a.implied_lambda == b.implied_lambda


def test_covariate_degenerate_u_is_lasso():
    lo = np.array([-1.0, 0.5, 2.0])
    joint = CovariatePrior(np.array([0.2, 0.3, 0.5]), lo, lo, np.array([1.0, 2.0, 3.0]), 0.4)
    grp = GroupPrior.from_arrays([0.2, 0.3, 0.5], expit(lo), [1.0, 2.0, 3.0], 0.4)
    quad = se.QuadratureSpec(n_mc=5000)
    a = se.se_salasso_covariate(joint, np.zeros(2), 0.3, 0.8, 1.4, quad)
    b = se.se_lasso(grp, 0.3, 0.8, 1.4, quad)
    assert a.tau_star == pytest.approx(b.tau_star, abs=1e-12)
    assert a.implied_lambda == pytest.approx(b.implied_lambda, abs=1e-12)


def test_null_prior_noiseless_has_zero_risk():
    tr = se.se_lasso(GroupPrior.single(1.0), 0.0, 0.5, 1.0)
    assert tr.tau_star == 0 and tr.predicted_risk == 0 and tr.implied_lambda == 0


def test_fixed_point_equation_holds():
    prior = GROUP_PRESET.prior()
    tr = se.se_lasso(prior, 0.2, 0.64, 2.0)
    t = tr.tau_star
    mse = sum(c * se.mse_expectation(comp, t, 2.0 * t) for c, comp in zip(prior.c, prior.components))
    assert t**2 == pytest.approx(0.2 + mse / 0.64, rel=1e-9)
    assert tr.predicted_risk == pytest.approx(0.64 * (t**2 - 0.2))


def test_small_alpha_below_minimum_gives_nonpositive_lambda_or_no_fixed_point():
    prior = GROUP_PRESET.prior()
    try:
        tr = se.se_lasso(prior, 0.2, 0.3, 0.1)
    except se.FixedPointNotReached:
        return
    assert tr.implied_lambda <= 0


def test_negative_risk_guard():
    with pytest.raises(se.NegativeRisk):
        se.predicted_risk(0.1, 1.0, 1.0)


def test_optimal_alpha_beats_grid():
    prior = GROUP_PRESET.prior()
    make = lambda a: se.se_lasso(prior, 0.2, 0.64, a)
    best = se.optimal_alpha(make)
    _, traces = se.risk_curve(make)
    assert best.predicted_risk <= min(t.predicted_risk for t in traces) + 1e-12
    assert all(t.implied_lambda > 0 for t in traces)


def test_asymptotic_weights_monotone_in_signal():
    prior = GroupPrior.from_arrays([0.5, 0.5], [0.2, 0.9], 2.0, 0.5)
    w = se.asymptotic_weights_group(prior, 0.6, 1.5, 1.0)
    assert w[0] < w[1]
    null = se.asymptotic_weights_group(GroupPrior.single(1.0), 0.6, 1e6, 1.0)
    assert null[0] == se.C_U


def test_covariate_lasso_reduces_to_marginal_prior():
    from salasso.sim import COVARIATE_PRESET

    joint = COVARIATE_PRESET.prior()
    quad = se.QuadratureSpec(n_mc=20_000)
    a = se.se_salasso_covariate(joint, np.zeros(2), 0.2, 0.64, 1.5, quad)
    b = se.se_lasso(joint.marginal(), 0.2, 0.64, 1.5, quad)
    # only the stratified U sample separates the two
    assert a.tau_star == pytest.approx(b.tau_star, rel=1e-5)
