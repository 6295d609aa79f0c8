"""Soft thresholding and the weighted-l1 least-squares solver.

The solver minimises

    (2n)^{-1} ||y - X b||^2 + lam * sum_j w_j |b_j|

by cyclic coordinate descent. It alternates full sweeps with sweeps over the
current support and stops once the KKT residual (see :func:`check_kkt`) is
below ``tol``. Nothing is randomised, so a fit is a deterministic function of
its inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .model import LinearDataset, SalassoError, SolverConfig, WeightVector


class NegativeThreshold(SalassoError, ValueError):
    pass


class NegativeLambda(SalassoError, ValueError):
    pass


class ZeroWeightUnpenalized(SalassoError, ValueError):
    pass


class MaxIterationsExceeded(SalassoError, RuntimeWarning):
    """Warned (not raised) when an iterative solver hits its iteration cap."""


def soft_threshold(x, theta):
    """``sign(x) * max(|x| - theta, 0)``, elementwise."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise NegativeThreshold("threshold must be nonnegative")
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * np.maximum(np.abs(x) - theta, 0.0)
    return out if out.ndim else float(out)


def soft_threshold_derivative(x, theta):
    """Derivative of :func:`soft_threshold` in ``x``; 0 at the kinks."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise NegativeThreshold("threshold must be nonnegative")
    out = (np.abs(np.asarray(x, dtype=float)) > theta).astype(float)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class LassoFit:
    beta: np.ndarray
    n_iters: int
    kkt_residual: float
    objective: float
    converged: bool = True
    objective_history: np.ndarray = field(default=None, repr=False)


def objective(ds: LinearDataset, w, lam: float, beta) -> float:
    w = w.w if isinstance(w, WeightVector) else np.asarray(w, float)
    r = ds.y - ds.X @ beta
    nz = beta != 0  # keeps 1e30 * 0 out of the sum
    return float(r @ r / (2 * ds.n) + lam * np.sum(w[nz] * np.abs(beta[nz])))


def check_kkt(ds: LinearDataset, w, lam: float, beta) -> float:
    """Largest violation of the weighted-lasso optimality conditions at ``beta``."""
    w = w.w if isinstance(w, WeightVector) else np.asarray(w, float)
    beta = np.asarray(beta, dtype=float)
    g = ds.X.T @ (ds.y - ds.X @ beta) / ds.n
    pen = lam * w
    active = beta != 0
    viol = np.where(
        active,
        np.abs(g - pen * np.sign(beta)),
        np.maximum(0.0, np.abs(g) - pen),
    )
    return float(viol.max(initial=0.0))


def lambda_max(ds: LinearDataset, w=None) -> float:
    """Smallest ``lam`` for which ``beta = 0`` solves the weighted problem."""
    w = np.ones(ds.p) if w is None else (w.w if isinstance(w, WeightVector) else np.asarray(w, float))
    if np.any(w <= 0):
        raise ZeroWeightUnpenalized("lambda_max is infinite when some weight is 0")
    return float(np.max(np.abs(ds.X.T @ ds.y) / (ds.n * w)))


@njit(cache=True, nogil=True)
def _update(X, j, colsq, pen, beta, r, n):
    xj = X[:, j]
    bj = beta[j]
    z = xj @ r / n + colsq[j] * bj
    if z > pen[j]:
        new = (z - pen[j]) / colsq[j]
    elif z < -pen[j]:
        new = (z + pen[j]) / colsq[j]
    else:
        new = 0.0
    d = new - bj
    if d != 0.0:
        r -= d * xj
        beta[j] = new
    return abs(d) * colsq[j]


@njit(cache=True, nogil=True)
def _kkt(X, r, pen, beta, n):
    g = X.T @ r / n
    worst = 0.0
    for j in range(beta.shape[0]):
        if beta[j] > 0:
            v = abs(g[j] - pen[j])
        elif beta[j] < 0:
            v = abs(g[j] + pen[j])
        else:
            v = abs(g[j]) - pen[j]
        if v > worst:
            worst = v
    return worst


@njit(cache=True, nogil=True)
def _cd(X, y, pen, beta, tol, max_iter, hist):
    n, p = X.shape
    colsq = np.empty(p)
    for j in range(p):
        colsq[j] = X[:, j] @ X[:, j] / n
    r = y - X @ beta
    sweeps = 0
    converged = False
    while sweeps < max_iter:
        for j in range(p):
            if colsq[j] > 0.0:
                _update(X, j, colsq, pen, beta, r, n)
        hist[sweeps] = r @ r / (2 * n)
        for j in range(p):
            if beta[j] != 0.0:
                hist[sweeps] += pen[j] * abs(beta[j])
        sweeps += 1
        # fresh residual so rounding drift cannot stall the test
        r = y - X @ beta
        if _kkt(X, r, pen, beta, n) <= 0.5 * tol:
            converged = True
            break
        active = np.flatnonzero(beta)
        inner = 0
        while sweeps < max_iter:
            biggest = 0.0
            for j in active:
                step = _update(X, j, colsq, pen, beta, r, n)
                if step > biggest:
                    biggest = step
            sweeps += 1
            inner += 1
            if biggest <= 0.1 * tol:
                break
            # slow contraction: steps can stay above 0.1 * tol long after the
            # optimality conditions are met
            if inner % 16 == 0 and _kkt(X, r, pen, beta, n) <= 0.25 * tol:
                break
    return sweeps, converged


def fit_weighted_lasso(
    ds: LinearDataset,
    w=None,
    lam: float = 0.0,
    cfg: Optional[SolverConfig] = None,
    warm_start=None,
) -> LassoFit:
    """Solve the weighted lasso by coordinate descent.

    Parameters
    ----------
    ds : LinearDataset
    w : WeightVector or array, optional
        Per-coefficient penalty multipliers; all ones when omitted.
    lam : float
        Common penalty level, ``>= 0``.
    cfg : SolverConfig, optional
        ``tol`` bounds the returned KKT residual; ``max_iter`` caps the
        number of coordinate sweeps.
    warm_start : array, optional
        Starting coefficients.

    Returns
    -------
    LassoFit
        ``converged`` is False (and :class:`MaxIterationsExceeded` is
        warned) if the sweep budget ran out; ``beta`` is then the last
        iterate.
    """
    cfg = cfg or SolverConfig()
    if lam < 0:
        raise NegativeLambda(f"lambda must be nonnegative, got {lam}")
    w = np.ones(ds.p) if w is None else (w.w if isinstance(w, WeightVector) else np.asarray(w, float))
    pen = np.ascontiguousarray(lam * w, dtype=float)
    beta = np.zeros(ds.p) if warm_start is None else np.array(warm_start, dtype=float)
    hist = np.full(cfg.max_iter, np.nan)
    sweeps, converged = _cd(ds.X, ds.y, pen, beta, cfg.tol, cfg.max_iter, hist)
    kkt = check_kkt(ds, w, lam, beta)
    if not converged:
        warnings.warn(
            f"coordinate descent stopped after {sweeps} sweeps with KKT residual {kkt:.3g}",
            MaxIterationsExceeded,
            stacklevel=2,
        )
    history = hist[:sweeps]
    return LassoFit(
        beta=beta,
        n_iters=int(sweeps),
        kkt_residual=kkt,
        objective=objective(ds, w, lam, beta),
        converged=bool(converged),
        # objective after each full sweep; active-set sweeps leave NaN slots
        objective_history=history[~np.isnan(history)],
    )
