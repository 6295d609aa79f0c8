import numpy as np
import pytest

from salasso.location import (
    ConditionViolated,
    bound_value,
    group_thresholds,
    location_estimator,
    m0,
    mc_risk,
    pilot_groups_means,
    remainder_term,
    risk_bound,
    simulate_location,
    theorem_condition,
    universal_bound,
    universal_estimator,
)


def test_m0():
    rng = np.random.default_rng(0)
    assert m0(2.0) == pytest.approx(np.mean(np.abs(2.0 * rng.standard_normal(10**6))), rel=5e-3)


def test_thresholds_infinite_for_empty_groups():
    t = group_thresholds([0.0, 2.0], [100, 100], 1.0)
    assert np.isinf(t[0])
    assert t[1] == pytest.approx(m0(1.0) * np.sqrt(2 * np.log(100)) / 2.0)


def test_estimator_shrinks_null_group_more():
    inst = simulate_location([2000, 500, 500], [3.0, 5.0], 1.0, 0)
    est = location_estimator(inst.Y, inst.partition, 1.0)
    null = est[:2000]
    assert np.mean(null == 0) > 0.99
    theta = group_thresholds(pilot_groups_means(inst.Y, inst.partition, 1.0), [2000, 500, 500], 1.0)
    assert theta[0] > theta[1] > theta[2]
    # strong signal survives, shifted by its own threshold
    assert np.mean(est[2500:]) == pytest.approx(5.0 - theta[2], abs=0.2)


def test_pilot_means():
    M = pilot_groups_means(np.array([3.0, -1.0, 0.5, 2.5]), [[0, 1], [2, 3]], 1.0)
    np.testing.assert_allclose(M, [1.0, 0.75])
    with pytest.raises(ValueError):
        pilot_groups_means(np.ones(2), [[0, 1]], 0.0)


def test_condition_fails_for_weak_signal():
    cond = theorem_condition([1000, 1000], [0.5], 1.0, mc=200)
    assert not cond.holds
    with pytest.raises(ConditionViolated):
        risk_bound([1000, 1000], [0.5], 1.0, mc=200)


def test_condition_and_bound_for_strong_signal():
    sizes, a = [2000, 2000, 2000], [3.0, 3.0]
    cond = theorem_condition(sizes, a, 1.0, mc=300)
    assert cond.holds and cond.margin > 10 * cond.margin_se
    b = risk_bound(sizes, a, 1.0, mc=300)
    assert b == pytest.approx(bound_value(sizes, a, 1.0, cond.ratio_moments))
    assert np.mean(mc_risk(sizes, a, 1.0, reps=5)) <= b


def test_universal_oracle_inequality():
    rng = np.random.default_rng(1)
    mu = np.r_[np.zeros(900), rng.normal(0, 3, 100)]
    losses = [np.sum((universal_estimator(mu + rng.standard_normal(mu.size), 1.0) - mu) ** 2) for _ in range(20)]
    assert np.mean(losses) <= universal_bound(mu, 1.0)


def test_remainder_decreases():
    assert remainder_term(10**6) < remainder_term(10**3)


def test_input_validation():
    with pytest.raises(ValueError):
        simulate_location([10, 10], [1.0, 2.0], 1.0, 0)
    with pytest.raises(ValueError):
        theorem_condition([10], [], 1.0)
