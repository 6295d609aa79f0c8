import numpy as np
import pytest
from scipy.special import expit

from salasso.sim import (
    COVARIATE_PRESET,
    GROUP_PRESET,
    CovariateRecipe,
    DesignKind,
    InvalidRho,
    eta_recipe,
    eta_zero_probabilities,
    gen_design,
    gen_response,
    gen_signal_covariate,
    gen_signal_eta,
    gen_signal_group,
    group_sizes,
    make_rng,
    simulate,
)


def test_streams_are_reproducible_and_distinct():
    a = make_rng(5, 1, 2).random(4)
    assert np.array_equal(a, make_rng(5, 1, 2).random(4))
    assert not np.array_equal(a, make_rng(5, 1, 3).random(4))
    assert not np.array_equal(a, make_rng(6, 1, 2).random(4))


def test_replicate_independent_of_consumption_order():
    x1 = simulate("group", 50, 100, 0.2, 9, 4)
    _ = simulate("group", 50, 100, 0.2, 9, 3)
    x2 = simulate("group", 50, 100, 0.2, 9, 4)
    assert np.array_equal(x1.X, x2.X) and np.array_equal(x1.y, x2.y)


# the shared factor makes equicorrelated column norms move together
@pytest.mark.parametrize("kind, tol", [("iid", 0.02), ("binary", 1e-12), ("ar1(0.5)", 0.02), ("equicorrelated(0.3)", 0.1)])
def test_design_column_norms(kind, tol):
    X = gen_design(kind, 400, 300, 0)
    assert np.mean(np.sum(X**2, axis=0)) == pytest.approx(1.0, rel=tol)


def test_binary_entries():
    X = gen_design("binary", 16, 5, 1)
    assert set(np.unique(X * 4).tolist()) <= {-1.0, 1.0}


def test_ar1_correlation():
    X = gen_design("ar1(0.6)", 20000, 4, 2)
    C = np.corrcoef(X.T)
    assert C[0, 1] == pytest.approx(0.6, abs=0.03)
    assert C[0, 2] == pytest.approx(0.36, abs=0.03)


def test_equicorrelated_correlation():
    C = np.corrcoef(gen_design("equicorrelated(0.4)", 20000, 3, 2).T)
    assert C[0, 2] == pytest.approx(0.4, abs=0.03)


@pytest.mark.parametrize("text", ["ar1(1.0)", "equicorrelated(-0.2)"])
def test_invalid_rho(text):
    with pytest.raises(InvalidRho):
        DesignKind.parse(text)


def test_design_kind_round_trip():
    assert str(DesignKind.parse("ar1(0.25)")) == "ar1(0.25)"
    with pytest.raises(ValueError):
        DesignKind.parse("weird")


def test_group_sizes():
    assert group_sizes(500, GROUP_PRESET.c).tolist() == [450, 16, 16, 18]
    with pytest.raises(ValueError):
        group_sizes(3, GROUP_PRESET.c)


def test_group_signal_frequencies():
    beta, part = gen_signal_group(200_000, GROUP_PRESET, 0)
    for block, pi, mu in zip(part, GROUP_PRESET.pi, GROUP_PRESET.mu):
        b = beta[block]
        assert np.mean(b == 0) == pytest.approx(pi, abs=0.02)
        if pi < 1:
            assert np.mean(b[b != 0]) == pytest.approx(mu, abs=0.05)


def test_covariate_signal_follows_link():
    beta, U, part = gen_signal_covariate(200_000, COVARIATE_PRESET, 1)
    assert U.shape == (200_000, 1)
    u = U[:, 0]
    lo, hi = COVARIATE_PRESET.bounds()
    for d, block in enumerate(part):
        assert np.all((u[block] >= lo[d]) & (u[block] <= hi[d]))
    assert np.mean(beta == 0) == pytest.approx(np.mean(expit(u)), abs=0.005)


def test_covariate_bounds_are_ordered():
    r = CovariateRecipe((0.5, 0.5), (0.9, 0.0), (0.1, 1.0), (1.0, 1.0), 0.3)
    lo, hi = r.bounds()
    assert np.all(lo <= hi) and np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))


def test_eta_probabilities():
    p = 300
    rec = eta_recipe("high", 0.2)
    pi0 = eta_zero_probabilities(p, 0.2, rec.odds, rec.c)
    sizes = group_sizes(p, rec.c)
    assert sizes @ (1 - pi0) / p == pytest.approx(0.2)
    assert np.allclose(eta_zero_probabilities(p, 0.3, [1, 1, 1, 1], rec.c), 0.7)
    beta, _ = gen_signal_eta(p, 0.2, rec.odds, rec.mu, seed=0)
    assert beta.size == p


def test_response_noiseless_and_noise_scale():
    X = gen_design("iid", 5000, 3, 0)
    b = np.array([1.0, -1.0, 0.5])
    assert np.array_equal(gen_response(X, b, 0.0, 0), X @ b)
    r = gen_response(X, b, 0.25, 0) - X @ b
    assert np.std(r) == pytest.approx(0.5, rel=0.05)
