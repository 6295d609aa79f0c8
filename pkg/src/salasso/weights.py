"""Penalty-weight updates given a coefficient estimate.

Each function returns the minimiser over the admissible weight set of

    sum_j [ w_j |beta_j| - log g(w_j; gamma) ]

where ``log g(w; gamma) = w**(1 - 1/gamma) / (1 - 1/gamma)`` for ``gamma < 1``
and ``log w`` for ``gamma = 1``. Additive normalising constants of ``log g``
are dropped; they do not move any minimiser.

Group and unstructured weights have closed forms. Covariate weights
``w_j = exp(tau0 + u_j @ tau1)`` come from a convex problem in ``tau`` that is
solved by projected Newton over a box.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import C_U, SalassoError, WeightVector, _check_gamma

#: Default per-coordinate bound on (tau0, tau1).
DEFAULT_BOX = 20.0

# gamma within this distance of 1 uses the log branch of log g
_GAMMA_ONE = 1e-9


class OptimizerDidNotConverge(SalassoError, RuntimeWarning):
    """Warned when the covariate optimiser exhausts its iteration budget."""


def _power_weight(m, gamma, cap):
    """``min(m**-gamma, cap)`` with ``m = 0`` mapped to ``cap``."""
    m = np.asarray(m, dtype=float)
    out = np.full(m.shape, float(cap))
    pos = m > 0
    with np.errstate(over="ignore"):
        out[pos] = np.minimum(np.exp(-gamma * np.log(m[pos])), cap)
    return out


def update_weights_group(beta, partition, gamma: float, cap: float = C_U) -> WeightVector:
    """Weight shared by a group: ``mean(|beta|_S)**-gamma``, capped.

    A group whose coefficients are all zero gets the cap.
    """
    gamma = _check_gamma(gamma)
    absb = np.abs(np.asarray(beta, dtype=float))
    w = np.empty_like(absb)
    for block in partition:
        w[block] = _power_weight(absb[block].mean(), gamma, cap)
    return WeightVector(w, cap)


def update_weights_unstructured(beta, gamma: float, cap: float = C_U) -> WeightVector:
    """Classical adaptive-lasso weights ``|beta_j|**-gamma``, capped."""
    gamma = _check_gamma(gamma)
    return WeightVector(_power_weight(np.abs(np.asarray(beta, float)), gamma, cap), cap)


# ---------------------------------------------------------------------------
# covariate structure


@dataclass(frozen=True)
class CovariateTau:
    """Link parameters with the box they were optimised over."""

    tau0: float
    tau1: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    converged: bool = True
    n_iter: int = 0

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([[self.tau0], self.tau1])

    def weights(self, U) -> np.ndarray:
        """Unclipped ``f(u_j; tau) = exp(tau0 + u_j @ tau1)``."""
        with np.errstate(over="ignore"):
            return np.exp(self.tau0 + _as_matrix(U) @ self.tau1)


def _as_matrix(U) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    return U[:, None] if U.ndim == 1 else U


def make_box(q: int, bound=DEFAULT_BOX):
    """Lower/upper arrays of length ``q + 1`` from a scalar or (lo, hi) pair."""
    if np.ndim(bound) == 0:
        lo, hi = -float(bound), float(bound)
    else:
        lo, hi = bound
    lower = np.broadcast_to(np.asarray(lo, float), (q + 1,)).copy()
    upper = np.broadcast_to(np.asarray(hi, float), (q + 1,)).copy()
    if np.any(lower > upper):
        raise ValueError("empty box")
    return lower, upper


def _design(U):
    U = _as_matrix(U)
    return np.hstack([np.ones((U.shape[0], 1)), U])


def _terms(tau, absb, Z, gamma, weights=None):
    """Per-feature objective, its derivative and curvature in the linear score."""
    s = Z @ tau
    with np.errstate(over="ignore", invalid="ignore"):
        f = np.exp(s)
        if abs(1.0 - gamma) < _GAMMA_ONE:
            val = f * absb - s
            d1 = f * absb - 1.0
            d2 = f * absb
        else:
            kappa = 1.0 - 1.0 / gamma
            fk = np.exp(kappa * s)
            val = f * absb - fk / kappa
            d1 = f * absb - fk
            d2 = f * absb - kappa * fk
    if weights is None:
        return val.mean(), d1, d2
    return val @ weights, d1, d2


def covariate_objective(tau, beta, U, gamma: float) -> float:
    """Average ``f_j |beta_j| - log g(f_j; gamma)`` over features.

    ``tau`` may be a :class:`CovariateTau` or a vector ``(tau0, *tau1)``.
    """
    gamma = _check_gamma(gamma)
    tau = tau.vector if isinstance(tau, CovariateTau) else np.asarray(tau, float)
    val, _, _ = _terms(tau, np.abs(np.asarray(beta, float)), _design(U), gamma)
    return float(val)


def covariate_objective_gradient(tau, beta, U, gamma: float) -> np.ndarray:
    gamma = _check_gamma(gamma)
    tau = tau.vector if isinstance(tau, CovariateTau) else np.asarray(tau, float)
    Z = _design(U)
    _, d1, _ = _terms(tau, np.abs(np.asarray(beta, float)), Z, gamma)
    return Z.T @ d1 / Z.shape[0]


def covariate_objective_hessian(tau, beta, U, gamma: float) -> np.ndarray:
    gamma = _check_gamma(gamma)
    tau = tau.vector if isinstance(tau, CovariateTau) else np.asarray(tau, float)
    Z = _design(U)
    _, _, d2 = _terms(tau, np.abs(np.asarray(beta, float)), Z, gamma)
    return (Z * d2[:, None]).T @ Z / Z.shape[0]


def minimize_link(absb, Z, gamma, lower, upper, weights=None, tol=1e-12, max_iter=200, x0=None):
    """Projected Newton for the convex link problem over the box ``[lower, upper]``.

    ``absb`` holds the per-feature magnitudes (or their expectations) and
    ``weights`` optional per-feature averaging weights summing to one.
    Returns ``(tau, converged, n_iter)``.
    """
    m = absb.size
    wts = np.full(m, 1.0 / m) if weights is None else np.asarray(weights, float)

    def parts(x):
        val, d1, d2 = _terms(x, absb, Z, gamma, wts)
        return val, Z.T @ (wts * d1), (Z * (wts * d2)[:, None]).T @ Z

    if x0 is None:
        x0 = np.zeros(Z.shape[1])
        mean_abs = absb @ wts
        if mean_abs > 0:
            x0[0] = -gamma * np.log(mean_abs)
    x = np.clip(x0, lower, upper)
    f, g, H = parts(x)
    eps = 1e-10
    for it in range(1, max_iter + 1):
        # free variables: not pinned at a bound by the gradient
        pinned = ((x <= lower + eps) & (g > 0)) | ((x >= upper - eps) & (g < 0))
        free = ~pinned
        pg = np.where(free, g, 0.0)
        if np.max(np.abs(pg), initial=0.0) <= tol:
            return x, True, it - 1
        d = np.zeros_like(x)
        Hf = H[np.ix_(free, free)]
        try:
            L = np.linalg.cholesky(Hf)
            d[free] = np.linalg.solve(L.T, np.linalg.solve(L, g[free]))
        except np.linalg.LinAlgError:
            d[free] = g[free]
        if not np.all(np.isfinite(d)) or d @ g <= 0:
            d = pg
        step = 1.0
        while True:
            x_new = np.clip(x - step * d, lower, upper)
            f_new, g_new, H_new = parts(x_new)
            if np.isfinite(f_new) and f_new <= f - 1e-4 * (g @ (x - x_new)):
                break
            step *= 0.5
            if step < 1e-20:
                # no progress possible at machine precision
                return x, bool(np.max(np.abs(pg)) <= 1e-8), it
        if np.max(np.abs(x_new - x)) <= 1e-15 * (1 + np.max(np.abs(x))):
            x, f, g, H = x_new, f_new, g_new, H_new
            pinned = ((x <= lower + eps) & (g > 0)) | ((x >= upper - eps) & (g < 0))
            return x, bool(np.max(np.abs(np.where(pinned, 0.0, g)), initial=0.0) <= 1e-8), it
        x, f, g, H = x_new, f_new, g_new, H_new
    return x, False, max_iter


def update_weights_covariate(beta, U, gamma: float, box=DEFAULT_BOX, cap: float = C_U):
    """Covariate-linked weights ``w_j = exp(tau0 + u_j @ tau1)``.

    Parameters
    ----------
    beta : array (p,)
    U : array (p,) or (p, q)
    gamma : float in (0, 1]
    box : float or (lower, upper)
        Bounds on every entry of ``(tau0, tau1)``.
    cap : float
        Weights are clipped to ``[0, cap]`` after optimisation.

    Returns
    -------
    (WeightVector, CovariateTau)
    """
    gamma = _check_gamma(gamma)
    Z = _design(U)
    absb = np.abs(np.asarray(beta, float))
    if Z.shape[0] != absb.size:
        raise ValueError(f"U has {Z.shape[0]} rows but beta has {absb.size} entries")
    lower, upper = make_box(Z.shape[1] - 1, box)
    x, ok, it = minimize_link(absb, Z, gamma, lower, upper)
    if not ok:
        warnings.warn("covariate weight optimiser did not converge", OptimizerDidNotConverge, stacklevel=2)
    tau = CovariateTau(float(x[0]), x[1:].copy(), lower, upper, ok, it)
    return WeightVector(tau.weights(U), cap), tau


def update_weights(beta, structure, gamma: float, cap: float = C_U, box=DEFAULT_BOX) -> WeightVector:
    """Dispatch on a :class:`~salasso.model.StructureSpec`."""
    if structure is None or structure.kind == "none":
        return update_weights_unstructured(beta, gamma, cap)
    if structure.kind == "group":
        return update_weights_group(beta, structure.partition, gamma, cap)
    return update_weights_covariate(beta, structure.U, gamma, box, cap)[0]
