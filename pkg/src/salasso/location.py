"""Group-adaptive soft thresholding in the Gaussian location model.

Observations ``Y = mu + eps`` with ``eps ~ N(0, sigma^2)`` are split into
groups. A pilot soft-threshold at level ``tau_pilot`` gives each group a
signal-strength summary ``M_d`` (the mean pilot magnitude), and group ``d``
is then soft-thresholded at

    lambda_d / M_d,    lambda_d = sigma * M0 * sqrt(2 log n_d),    M0 = sigma * sqrt(2 / pi).

Groups with strong signal get smaller thresholds. Group 0 is the null group
in :class:`LocationInstance` and the bound functions; remaining groups carry
a constant mean ``a_d``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.stats import norm

from .model import SalassoError, validate_partition
from .prox import soft_threshold
from .sim import contiguous_partition, make_rng

_PHI1 = float(norm.pdf(1.0))


class ConditionViolated(SalassoError, ValueError):
    pass


def m0(sigma: float) -> float:
    """``E|eps|`` for ``eps ~ N(0, sigma^2)``."""
    return sigma * np.sqrt(2 / np.pi)


@dataclass(frozen=True)
class LocationInstance:
    Y: np.ndarray
    mu_true: np.ndarray
    partition: tuple
    sigma: float
    a: np.ndarray


def simulate_location(sizes, a, sigma: float, seed: int, *key: int) -> LocationInstance:
    """Null first group, then constant means ``a`` on the remaining groups.

    ``a`` has one entry per non-null group.
    """
    sizes = np.asarray(sizes, int)
    a = np.asarray(a, float)
    if a.size != sizes.size - 1:
        raise ValueError("need one signal level per non-null group")
    mu = np.repeat(np.concatenate([[0.0], a]), sizes)
    Y = mu + sigma * make_rng(seed, 11, *key).standard_normal(mu.size)
    return LocationInstance(Y, mu, contiguous_partition(sizes), float(sigma), a)


def pilot_groups_means(Y, partition, tau_pilot: float) -> np.ndarray:
    """Per-group mean of ``|soft_threshold(Y, tau_pilot)|``."""
    if tau_pilot <= 0:
        raise ValueError("pilot threshold must be positive")
    mag = np.abs(soft_threshold(np.asarray(Y, float), tau_pilot))
    return np.array([mag[np.asarray(b)].mean() for b in partition])


def group_thresholds(M, sizes, sigma: float) -> np.ndarray:
    """``sigma * M0 * sqrt(2 log n_d) / M_d``; infinite where ``M_d = 0``."""
    lam = sigma * m0(sigma) * np.sqrt(2 * np.log(np.asarray(sizes, float)))
    M = np.asarray(M, float)
    out = np.full(M.shape, np.inf)
    pos = M > 0
    out[pos] = lam[pos] / M[pos]
    return out


def location_estimator(Y, partition, sigma: float, tau_pilot: float = None) -> np.ndarray:
    """Soft threshold each group at ``lambda_d / M_d`` (``tau_pilot`` defaults to ``sigma``)."""
    Y = np.asarray(Y, float)
    part = validate_partition(partition, Y.size)
    tau_pilot = sigma if tau_pilot is None else tau_pilot
    M = pilot_groups_means(Y, part, tau_pilot)
    theta = group_thresholds(M, [b.size for b in part], sigma)
    out = np.zeros_like(Y)
    for b, t in zip(part, theta):
        if np.isfinite(t):
            out[b] = soft_threshold(Y[b], t)
    return out


def _ratio_moments(sizes, a, sigma, tau_pilot, mc, seed, chunk=2_000_000):
    """Monte-Carlo mean and standard error of ``(M0 / M_d)^2`` for each signal group."""
    means, ses = [], []
    for d, (n_d, a_d) in enumerate(zip(sizes[1:], a), start=1):
        rng = make_rng(seed, 12, d)
        rows = max(1, chunk // n_d)
        M = []
        done = 0
        while done < mc:
            k = min(rows, mc - done)
            Y = a_d + sigma * rng.standard_normal((k, n_d))
            M.append(np.maximum(np.abs(Y) - tau_pilot, 0.0).mean(axis=1))
            done += k
        M = np.concatenate(M)
        with np.errstate(divide="ignore"):
            r = (m0(sigma) / M) ** 2
        means.append(r.mean())
        ses.append(r.std(ddof=1) / np.sqrt(mc) if mc > 1 and np.all(np.isfinite(r)) else np.nan)
    return np.array(means), np.array(ses)


class ConditionResult(NamedTuple):
    holds: bool
    margin: float
    margin_se: float
    ratio_moments: np.ndarray


def theorem_condition(sizes, a, sigma: float, mc: int = 1000, seed: int = 0, tau_pilot: float = None) -> ConditionResult:
    """Check ``min_d [(2 phi(1) + 1) a_d^2 - 2 sigma^2 log n_d E(M0/M_d)^2 - sigma^2] > 0``.

    ``sizes`` covers all groups (null group first); ``a`` the non-null ones.
    """
    sizes = np.asarray(sizes, int)
    a = np.asarray(a, float)
    if sizes.size < 2:
        raise ValueError("need a null group and at least one signal group")
    if a.size != sizes.size - 1:
        raise ValueError("need one signal level per non-null group")
    tau_pilot = sigma if tau_pilot is None else tau_pilot
    r, se = _ratio_moments(sizes, a, sigma, tau_pilot, mc, seed)
    logn = np.log(sizes[1:])
    with np.errstate(invalid="ignore"):
        margins = (2 * _PHI1 + 1) * a**2 - 2 * sigma**2 * logn * r - sigma**2
    k = int(np.argmin(margins))
    margin = float(margins[k])
    return ConditionResult(bool(margin > 0), margin, float(2 * sigma**2 * logn[k] * se[k]), r)


def remainder_term(n1: int) -> float:
    """The null-group term ``1 / sqrt(log n1)`` with unit constant, reported separately."""
    return 1.0 / np.sqrt(np.log(n1))


def risk_bound(sizes, a, sigma: float, mc: int = 1000, seed: int = 0, tau_pilot: float = None) -> float:
    """Risk bound for :func:`location_estimator`, without the null-group remainder.

    ``sum_d 2 sigma (sigma^2 + a_d^2) / (M0 sqrt(2 log n_d))
      + sum_d n_d [2 sigma^2 log n_d E(M0/M_d)^2 + sigma^2]`` over signal groups.

    Raises :class:`ConditionViolated` when :func:`theorem_condition` fails.
    """
    sizes = np.asarray(sizes, int)
    a = np.asarray(a, float)
    cond = theorem_condition(sizes, a, sigma, mc, seed, tau_pilot)
    if not cond.holds:
        raise ConditionViolated(f"condition margin {cond.margin:.4g} is not positive")
    return bound_value(sizes, a, sigma, cond.ratio_moments)


def bound_value(sizes, a, sigma, ratio_moments) -> float:
    """Evaluate the bound formula for given ``E(M0/M_d)^2`` values."""
    n = np.asarray(sizes, float)[1:]
    a = np.asarray(a, float)
    logn = np.log(n)
    first = 2 * sigma * (sigma**2 + a**2) / (m0(sigma) * np.sqrt(2 * logn))
    second = n * (2 * sigma**2 * logn * np.asarray(ratio_moments) + sigma**2)
    return float(first.sum() + second.sum())


def universal_bound(mu, sigma: float) -> float:
    """``(2 log n + 1) [sigma^2 + sum_i min(sigma^2, mu_i^2)]`` for the universal threshold."""
    mu = np.asarray(mu, float)
    return float((2 * np.log(mu.size) + 1) * (sigma**2 + np.minimum(sigma**2, mu**2).sum()))


def universal_estimator(Y, sigma: float) -> np.ndarray:
    Y = np.asarray(Y, float)
    return soft_threshold(Y, sigma * np.sqrt(2 * np.log(Y.size)))


def mc_risk(sizes, a, sigma: float, reps: int = 20, seed: int = 0, tau_pilot: float = None) -> np.ndarray:
    """Squared-error loss ``||mu_hat - mu||^2`` of :func:`location_estimator` per replicate."""
    out = np.empty(reps)
    for r in range(reps):
        inst = simulate_location(sizes, a, sigma, seed, r)
        out[r] = np.sum((location_estimator(inst.Y, inst.partition, sigma, tau_pilot) - inst.mu_true) ** 2)
    return out
