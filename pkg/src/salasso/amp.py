"""Approximate message passing for the lasso and its adaptive-threshold variants.

All variants run the same recursion with per-coordinate thresholds
``theta_t = alpha * tau_t * omega``:

    e^t     = y - X b^t + (e^{t-1} / delta) * mean(eta'(X^T e^{t-1} + b^{t-1}; theta_{t-1}))
    b^{t+1} = eta(X^T e^t + b^t; theta_t)

with ``b^0 = 0``, no correction term at ``t = 0`` and
``tau_t = ||e^t|| / sqrt(n)``. ``omega = 1`` is the lasso; a per-group or
per-feature ``omega`` gives the structure-adaptive versions. Designs are
expected on the unit-column-norm scale (entries of variance ``1/n``).

At a fixed point ``b*`` with final threshold level ``eta* = alpha * tau*``
and ``lam = eta* * (1 - mean(eta') / delta)``, ``b*`` satisfies the
optimality conditions of ``0.5 ||y - X b||^2 + lam * sum_j omega_j |b_j|``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import C_U, LinearDataset, SalassoError, validate_partition
from .prox import MaxIterationsExceeded, soft_threshold, soft_threshold_derivative
from .weights import DEFAULT_BOX, update_weights_covariate, _power_weight, _check_gamma


class Diverged(SalassoError, RuntimeError):
    pass


@dataclass(frozen=True)
class AmpResult:
    beta: np.ndarray
    residual: np.ndarray
    tau_hat: np.ndarray
    alpha: float
    omega: np.ndarray = field(repr=False)
    n_iter: int = 0
    converged: bool = True
    implied_lambda: float = float("nan")
    pseudo_data: np.ndarray = field(default=None, repr=False)

    @property
    def t(self) -> int:
        return self.n_iter

    @property
    def tau_star(self) -> float:
        return float(self.tau_hat[-1])

    def solver_lambda(self) -> float:
        """Penalty level for the ``(2n)^{-1}``-scaled objective of the direct solver."""
        return self.implied_lambda / self.residual.size


def _run(ds: LinearDataset, omega, alpha, max_iter, tol):
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    X, y = ds.X, ds.y
    n, p = X.shape
    delta = n / p
    omega = np.broadcast_to(np.asarray(omega, float), (p,))
    if np.any(omega < 0):
        raise ValueError("omega must be nonnegative")

    beta = np.zeros(p)
    e = y.copy()
    tau0 = np.linalg.norm(e) / np.sqrt(n)
    taus = [tau0]
    onsager_rate = 0.0
    converged = False
    pseudo = beta
    it = 0
    for it in range(1, max_iter + 1):
        tau = taus[-1]
        theta = alpha * tau * omega
        pseudo = X.T @ e + beta
        new = soft_threshold(pseudo, theta)
        rate = float(np.mean(soft_threshold_derivative(pseudo, theta))) / delta
        step = np.linalg.norm(new - beta) / max(1.0, np.linalg.norm(beta))
        beta = new
        onsager_rate = rate
        e = y - X @ beta + onsager_rate * e
        tau_next = np.linalg.norm(e) / np.sqrt(n)
        if not np.isfinite(tau_next) or tau_next > 1e6 * max(tau0, np.finfo(float).tiny):
            raise Diverged(f"effective noise level grew to {tau_next:.3g} at iteration {it}")
        taus.append(tau_next)
        if step <= tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"AMP stopped after {max_iter} iterations", MaxIterationsExceeded, stacklevel=3)
    # at a fixed point e = y - X b + rate * e, so X^T (y - X b) = (1 - rate) X^T e
    eta_star = alpha * taus[-1]
    lam = eta_star * (1.0 - onsager_rate)
    return AmpResult(
        beta=beta,
        residual=e,
        tau_hat=np.asarray(taus),
        alpha=float(alpha),
        omega=np.array(omega),
        n_iter=it,
        converged=converged,
        implied_lambda=float(lam),
        pseudo_data=pseudo,
    )


def amp_lasso(ds: LinearDataset, alpha_L: float, max_iter: int = 500, tol: float = 1e-9) -> AmpResult:
    """Lasso AMP with thresholds ``alpha_L * tau_t``."""
    return _run(ds, 1.0, alpha_L, max_iter, tol)


def amp_salasso_group(ds: LinearDataset, partition, omega, alpha_G: float, max_iter: int = 500, tol: float = 1e-9) -> AmpResult:
    """AMP with threshold ``alpha_G * tau_t * omega_d`` on group ``d``."""
    part = validate_partition(partition, ds.p)
    omega = np.asarray(omega, float)
    if omega.size != len(part):
        raise ValueError(f"need one omega per group ({len(part)}), got {omega.size}")
    per_feature = np.empty(ds.p)
    for block, w in zip(part, omega):
        per_feature[block] = w
    return _run(ds, per_feature, alpha_G, max_iter, tol)


def amp_salasso_covariate(ds: LinearDataset, omega, alpha_C: float, max_iter: int = 500, tol: float = 1e-9) -> AmpResult:
    """AMP with per-feature thresholds ``alpha_C * tau_t * omega_j``."""
    omega = np.asarray(omega, float)
    if omega.shape != (ds.p,):
        raise ValueError(f"omega must have length {ds.p}")
    return _run(ds, omega, alpha_C, max_iter, tol)


def amp_weights_group(beta_star_L, partition, gamma: float, cap: float = C_U) -> np.ndarray:
    """One multiplier per group: ``mean(|beta|_S)**-gamma``, capped."""
    gamma = _check_gamma(gamma)
    absb = np.abs(np.asarray(beta_star_L, float))
    return np.array([float(_power_weight(absb[np.asarray(b)].mean(), gamma, cap)) for b in partition])


def amp_weights_covariate(beta_star_L, U, gamma: float, box=DEFAULT_BOX, cap: float = C_U):
    """Per-feature multipliers from the covariate link; returns ``(omega, tau_min)``."""
    w, tau = update_weights_covariate(beta_star_L, U, gamma, box, cap)
    return w.w, tau
