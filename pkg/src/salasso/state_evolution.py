"""State evolution for soft-thresholding AMP with adaptive thresholds.

For a signal law ``B0`` and noise level ``tau`` the effective observation is
``B0 + tau * Z``. The state evolution iterates

    tau_{t+1}^2 = sigma2 + E{eta(B0 + tau_t Z; alpha * tau_t * omega) - B0}^2 / delta

from ``tau_0^2 = sigma2 + E[B0^2] / delta``, where ``omega`` is the
per-group (or per-covariate) threshold multiplier. At the fixed point
``tau*`` the asymptotic per-coordinate risk is ``delta * (tau*^2 - sigma2)``.

Expectations over ``Z`` are exact: for a fixed signal value ``b`` the risk,
``E eta'`` and ``E|eta|`` of soft thresholding are closed-form Gaussian
integrals. The normal slab of each point-normal component is integrated by
Gauss-Hermite quadrature (the integrand is smooth in the slab variable) and
the atom at zero is evaluated directly. Covariate-linked priors average the
conditional expectations over a stratified Monte-Carlo sample of ``U``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import math

import numpy as np
from numba import njit, vectorize
from numpy.polynomial.hermite_e import hermegauss
from scipy.optimize import minimize_scalar
from scipy.special import expit

from .model import C_U, CovariatePrior, GroupPrior, PointNormal, SalassoError, _check_gamma
from .weights import DEFAULT_BOX, CovariateTau, _design, make_box, minimize_link


class FixedPointNotReached(SalassoError, RuntimeError):
    pass


class NegativeRisk(SalassoError, ValueError):
    pass


_SQRT_2PI = math.sqrt(2 * math.pi)
_SQRT2 = math.sqrt(2.0)
# thresholds above this behave as "kill everything" and keep theta**2 finite
_THETA_MAX = 1e150


@dataclass(frozen=True)
class QuadratureSpec:
    n_hermite: int = 61
    n_mc: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.n_hermite < 2:
            raise ValueError("need at least 2 Hermite nodes")
        if self.n_mc < 1:
            raise ValueError("n_mc must be positive")

    def nodes(self):
        return _hermite(self.n_hermite)

    def covariate_sample(self, prior: CovariatePrior):
        return _covariate_sample(prior, self.n_mc, self.seed)


@lru_cache(maxsize=16)
def _hermite(n):
    z, w = hermegauss(n)
    return z, w / w.sum()


def _covariate_sample(prior, n, seed):
    """Group labels and covariates, stratified within each group."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5E]))
    counts = np.floor(prior.c * n).astype(int)
    counts[-1] = n - counts[:-1].sum()
    d = np.repeat(np.arange(prior.D), counts)
    frac = np.concatenate([(np.arange(k) + rng.random(k)) / max(k, 1) for k in counts])
    u = prior.lo[d] + (prior.hi[d] - prior.lo[d]) * frac
    return d, u


@njit(cache=True)
def _ncdf(x):
    return 0.5 * math.erfc(-x / _SQRT2)


@njit(cache=True)
def _npdf(x):
    return math.exp(-0.5 * x * x) / _SQRT_2PI


@vectorize(["float64(float64, float64, float64)"], cache=True)
def risk_given_signal(b, tau, theta):
    """``E{eta(b + tau Z; theta) - b}^2`` for fixed ``b``."""
    theta = min(theta, _THETA_MAX)
    hi = (theta - b) / tau  # Z above this: eta = b + tau Z - theta
    lo = (-theta - b) / tau  # Z below this: eta = b + tau Z + theta
    out = b * b * (_ncdf(hi) - _ncdf(lo))
    if math.isfinite(hi):
        q, f = _ncdf(-hi), _npdf(hi)
        out += tau * tau * (hi * f + q) - 2.0 * tau * theta * f + theta * theta * q
    if math.isfinite(lo):
        q, f = _ncdf(lo), _npdf(lo)
        out += tau * tau * (q - lo * f) - 2.0 * tau * theta * f + theta * theta * q
    return out


@vectorize(["float64(float64, float64, float64)"], cache=True)
def deta_given_signal(b, tau, theta):
    """``P(|b + tau Z| > theta)``."""
    return _ncdf((b - theta) / tau) + _ncdf((-b - theta) / tau)


@vectorize(["float64(float64, float64, float64)"], cache=True)
def abs_eta_given_signal(b, tau, theta):
    """``E|eta(b + tau Z; theta)|``."""
    theta = min(theta, _THETA_MAX)
    hi = (theta - b) / tau
    lo = (-theta - b) / tau
    return tau * _npdf(hi) + (b - theta) * _ncdf(-hi) + tau * _npdf(lo) - (b + theta) * _ncdf(lo)


@njit(cache=True, nogil=True)
def _mixture_rows(kind, pi, mu, s, tau, theta, z, w):
    """Atom-plus-slab expectation per row; slab by quadrature nodes ``z``."""
    out = np.empty(pi.shape[0])
    for i in range(pi.shape[0]):
        th = theta[i]
        if kind == 0:
            atom = risk_given_signal(0.0, tau, th)
        elif kind == 1:
            atom = deta_given_signal(0.0, tau, th)
        else:
            atom = abs_eta_given_signal(0.0, tau, th)
        slab = 0.0
        for k in range(z.shape[0]):
            b = mu[i] + s * z[k]
            if kind == 0:
                v = risk_given_signal(b, tau, th)
            elif kind == 1:
                v = deta_given_signal(b, tau, th)
            else:
                v = abs_eta_given_signal(b, tau, th)
            slab += w[k] * v
        out[i] = pi[i] * atom + (1.0 - pi[i]) * slab
    return out


_KINDS = {"mse": 0, "deta": 1, "abs": 2}


def _component_expectation(kind, pi, mu, s, tau, theta, quad):
    """Expectation of a closed-form kernel over point-normal signals.

    ``pi``, ``mu`` and ``theta`` broadcast together, one entry per mixture
    component or per covariate draw.
    """
    z, w = quad.nodes()
    pi, mu, theta = np.broadcast_arrays(np.asarray(pi, float), np.asarray(mu, float), np.asarray(theta, float))
    shape = pi.shape
    flat = [np.ascontiguousarray(a.ravel()) for a in (pi, mu, theta)]
    vals = _mixture_rows(_KINDS[kind], flat[0], flat[1], float(s), float(tau), flat[2], z, w)
    return vals.reshape(shape) if shape else vals[0]


def _as_component(c):
    return c if isinstance(c, PointNormal) else PointNormal(*c)


def mse_expectation(prior_component, tau: float, theta: float, quad: Optional[QuadratureSpec] = None) -> float:
    """``E{eta(B0 + tau Z; theta) - B0}^2`` for a point-normal ``B0``."""
    quad = quad or QuadratureSpec()
    c = _as_component(prior_component)
    if tau <= 0:
        raise ValueError("tau must be positive")
    return float(_component_expectation("mse", c.pi, c.mu, c.s, tau, theta, quad))


def deta_expectation(prior_component, tau: float, theta: float, quad: Optional[QuadratureSpec] = None) -> float:
    """``E eta'(B0 + tau Z; theta) = P(|B0 + tau Z| > theta)``."""
    quad = quad or QuadratureSpec()
    c = _as_component(prior_component)
    return float(_component_expectation("deta", c.pi, c.mu, c.s, tau, theta, quad))


def abs_eta_expectation(prior_component, tau: float, theta: float, quad: Optional[QuadratureSpec] = None) -> float:
    """``E|eta(B0 + tau Z; theta)|``."""
    quad = quad or QuadratureSpec()
    c = _as_component(prior_component)
    return float(_component_expectation("abs", c.pi, c.mu, c.s, tau, theta, quad))


# ---------------------------------------------------------------------------
# mixtures


class _GroupLaw:
    """Group mixture with per-component threshold multipliers."""

    def __init__(self, prior: GroupPrior, omega, quad):
        self.c = prior.c
        self.pi = np.array([k.pi for k in prior.components])
        self.mu = np.array([k.mu for k in prior.components])
        self.s = np.array([k.s for k in prior.components])
        self.omega = np.broadcast_to(np.asarray(omega, float), self.c.shape)
        self.quad = quad
        self.second_moment = prior.second_moment

    def expect(self, kind, tau, eta):
        vals = [
            _component_expectation(kind, self.pi[d], self.mu[d], self.s[d], tau, eta * self.omega[d], self.quad)
            for d in range(self.c.size)
        ]
        return float(self.c @ np.asarray(vals))


class _CovariateLaw:
    """(U, B0) law averaged over a fixed stratified sample of U."""

    def __init__(self, prior: CovariatePrior, omega_of_u, quad):
        d, u = quad.covariate_sample(prior)
        self.pi = expit(u)
        self.mu = prior.mu[d]
        self.s = prior.s
        self.omega = omega_of_u(u)
        self.quad = quad
        self.second_moment = float(np.mean((1 - self.pi) * (self.mu**2 + self.s**2)))

    def expect(self, kind, tau, eta):
        vals = _component_expectation(kind, self.pi, self.mu, self.s, tau, eta * self.omega, self.quad)
        return float(np.mean(vals))


# ---------------------------------------------------------------------------
# fixed point


@dataclass(frozen=True)
class SETrace:
    tau_sequence: np.ndarray
    tau_star: float
    alpha: float
    implied_lambda: float
    predicted_risk: float
    variant: str
    sigma2: float = 0.0
    delta: float = 1.0
    omega: Optional[np.ndarray] = field(default=None, repr=False)


def predicted_risk(tau_star: float, sigma2: float, delta: float) -> float:
    """Asymptotic per-coordinate squared-error risk ``delta * (tau*^2 - sigma2)``."""
    r = delta * (tau_star**2 - sigma2)
    if r < -1e-10 * max(1.0, delta * sigma2):
        raise NegativeRisk(f"tau*^2={tau_star**2} is below sigma2={sigma2}")
    return max(r, 0.0)


def _iterate(law, sigma2, delta, alpha, tol=1e-10, max_iter=10_000):
    """Fixed-point iteration on tau with damping once the updates oscillate."""
    tau2 = sigma2 + law.second_moment / delta
    taus = [np.sqrt(tau2)]
    if tau2 == 0:
        return np.array(taus)
    damp = 1.0
    prev_step = 0.0
    for _ in range(max_iter):
        tau = taus[-1]
        target = sigma2 + law.expect("mse", tau, alpha * tau) / delta
        step = np.sqrt(target) - tau
        if prev_step * step < 0:
            damp = 0.5
        new = tau + damp * step
        taus.append(new)
        if not np.isfinite(new) or new > 1e8 * (taus[0] + 1):
            raise FixedPointNotReached(f"state evolution diverges at alpha={alpha}")
        if abs(new - tau) <= tol:
            return np.array(taus)
        prev_step = step
    raise FixedPointNotReached(f"no fixed point within {max_iter} iterations at alpha={alpha}")


def _trace(law, sigma2, delta, alpha, variant, omega=None):
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    taus = _iterate(law, sigma2, delta, alpha)
    tau_star = float(taus[-1])
    if tau_star == 0:
        lam = 0.0
    else:
        eta = alpha * tau_star
        lam = eta * (1.0 - law.expect("deta", tau_star, eta) / delta)
    return SETrace(
        tau_sequence=taus,
        tau_star=tau_star,
        alpha=float(alpha),
        implied_lambda=float(lam),
        predicted_risk=predicted_risk(tau_star, sigma2, delta),
        variant=variant,
        sigma2=float(sigma2),
        delta=float(delta),
        omega=None if omega is None else np.asarray(omega, float),
    )


def se_lasso(prior: GroupPrior, sigma2: float, delta: float, alpha_L: float, quad: Optional[QuadratureSpec] = None) -> SETrace:
    """State evolution of lasso AMP with thresholds ``alpha_L * tau_t``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    law = _GroupLaw(prior, 1.0, quad or QuadratureSpec())
    return _trace(law, sigma2, delta, alpha_L, "lasso")


def se_salasso_group(prior: GroupPrior, omega, sigma2: float, delta: float, alpha_G: float, quad: Optional[QuadratureSpec] = None) -> SETrace:
    """State evolution with group thresholds ``alpha_G * tau_t * omega_d``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    omega = np.asarray(omega, float)
    if np.any(omega < 0):
        raise ValueError("omega must be nonnegative")
    law = _GroupLaw(prior, omega, quad or QuadratureSpec())
    return _trace(law, sigma2, delta, alpha_G, "group", omega)


def se_salasso_covariate(joint_prior: CovariatePrior, tau_min, sigma2: float, delta: float, alpha_C: float, quad: Optional[QuadratureSpec] = None, cap: float = C_U) -> SETrace:
    """State evolution with per-feature thresholds ``alpha_C * tau_t * f(U; tau_min)``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    law = _CovariateLaw(joint_prior, _link(tau_min, cap), quad or QuadratureSpec())
    return _trace(law, sigma2, delta, alpha_C, "covariate", _tau_vector(tau_min))


def _tau_vector(tau):
    return tau.vector if isinstance(tau, CovariateTau) else np.asarray(tau, float)


def _link(tau, cap):
    t = _tau_vector(tau)

    def omega(u):
        with np.errstate(over="ignore"):
            return np.minimum(np.exp(_design(u) @ t), cap)

    return omega


# ---------------------------------------------------------------------------
# lambda correspondence


def lambda_of_alpha_lasso(alpha_L, prior, sigma2, delta, quad=None) -> float:
    """``lambda(alpha) = alpha tau* (1 - E eta'(B0 + tau* Z; alpha tau*) / delta)``.

    The value is on the scale of ``0.5 * ||y - X b||^2 + lambda ||b||_1``
    with unit-norm columns; divide by ``n`` for the ``(2n)^{-1}`` objective
    of :func:`salasso.prox.fit_weighted_lasso`.
    """
    return se_lasso(prior, sigma2, delta, alpha_L, quad).implied_lambda


def lambda_of_alpha_group(alpha_G, prior, omega, sigma2, delta, quad=None) -> float:
    return se_salasso_group(prior, omega, sigma2, delta, alpha_G, quad).implied_lambda


def lambda_of_alpha_covariate(alpha_C, joint_prior, tau_min, sigma2, delta, quad=None) -> float:
    return se_salasso_covariate(joint_prior, tau_min, sigma2, delta, alpha_C, quad).implied_lambda


# ---------------------------------------------------------------------------
# limiting weights


def asymptotic_weights_group(prior: GroupPrior, tau_star_L: float, alpha_L: float, gamma: float, quad=None, cap: float = C_U) -> np.ndarray:
    """Large-p limit of the group weights computed from lasso AMP estimates.

    ``omega_d = (E|eta(B0d + tau*_L Z; alpha_L tau*_L)|)**-gamma``, capped.
    """
    gamma = _check_gamma(gamma)
    quad = quad or QuadratureSpec()
    theta = alpha_L * tau_star_L
    m = np.array([abs_eta_expectation(c, tau_star_L, theta, quad) for c in prior.components])
    out = np.full(m.shape, float(cap))
    pos = m > 0
    out[pos] = np.minimum(m[pos] ** -gamma, cap)
    return out


def limit_link_objective(tau, joint_prior: CovariatePrior, tau_star_L, alpha_L, gamma, quad=None) -> float:
    """Population version of the covariate link objective.

    ``E[f(U) |eta(B0 + tau*_L Z; alpha_L tau*_L)|] - E[log g(f(U); gamma)]``
    """
    from .weights import _terms

    quad = quad or QuadratureSpec()
    m, Z = _limit_inputs(joint_prior, tau_star_L, alpha_L, quad)
    val, _, _ = _terms(np.asarray(tau, float), m, Z, _check_gamma(gamma))
    return float(val)


def _limit_inputs(joint_prior, tau_star_L, alpha_L, quad):
    d, u = quad.covariate_sample(joint_prior)
    m = _component_expectation("abs", expit(u), joint_prior.mu[d], joint_prior.s, tau_star_L, alpha_L * tau_star_L, quad)
    return m, _design(u)


def asymptotic_tau_covariate(joint_prior: CovariatePrior, tau_star_L: float, alpha_L: float, gamma: float, quad=None, box=DEFAULT_BOX) -> CovariateTau:
    """Minimiser of the population link objective over the box."""
    quad = quad or QuadratureSpec()
    m, Z = _limit_inputs(joint_prior, tau_star_L, alpha_L, quad)
    lower, upper = make_box(Z.shape[1] - 1, box)
    x, ok, it = minimize_link(m, Z, _check_gamma(gamma), lower, upper)
    return CovariateTau(float(x[0]), x[1:].copy(), lower, upper, ok, it)


# ---------------------------------------------------------------------------
# risk curves


#: Default grid for risk-versus-alpha curves.
ALPHA_GRID = np.linspace(0.5, 3.0, 40)


def risk_curve(make_trace, alphas=ALPHA_GRID):
    """Evaluate ``make_trace(alpha)`` over a grid, skipping divergent alphas.

    Returns ``(alphas, traces)`` restricted to alphas with a finite fixed
    point and a positive implied lambda.
    """
    keep_a, keep_t = [], []
    for a in np.asarray(alphas, float):
        try:
            tr = make_trace(a)
        except FixedPointNotReached:
            continue
        if tr.implied_lambda > 0:
            keep_a.append(a)
            keep_t.append(tr)
    return np.array(keep_a), keep_t


def optimal_alpha(make_trace, alphas=ALPHA_GRID):
    """Alpha minimising the predicted risk: grid scan then bounded refinement."""
    grid, traces = risk_curve(make_trace, alphas)
    if not traces:
        raise FixedPointNotReached("no alpha on the grid has a finite fixed point")
    risks = np.array([t.predicted_risk for t in traces])
    k = int(np.argmin(risks))
    # a minimum on the lower edge may sit below the grid
    lo = grid[k - 1] if k > 0 else grid[0] / 4
    hi = grid[min(k + 1, grid.size - 1)]
    if hi <= lo:
        return traces[k]

    def f(a):
        try:
            tr = make_trace(a)
        except FixedPointNotReached:
            return np.inf
        return tr.predicted_risk if tr.implied_lambda > 0 else np.inf

    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
    if f(float(res.x)) < risks[k]:
        return make_trace(float(res.x))
    return traces[k]
