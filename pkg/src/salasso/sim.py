"""Seeded generators for designs, structured signals and responses.

Randomness comes from numpy's counter-based Philox bit generator. A stream
is named by a tuple of integers, ``make_rng(seed, *key)``, and the
SeedSequence built from ``(seed, *key)`` decides the counter offset. So a
replicate's design, signal and noise depend only on the seed and their
names, never on the order in which other streams were consumed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from .model import CovariatePrior, DimensionMismatch, GroupPrior, SalassoError

# stream tags
DESIGN, SIGNAL, NOISE, FOLDS = 1, 2, 3, 4

# probabilities are kept this far from 1 so their logits stay finite
_PROB_CLIP = 1e-12


class InvalidRho(SalassoError, ValueError):
    pass


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the stream ``(seed, *key)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, key)])))


# ---------------------------------------------------------------------------
# designs


@dataclass(frozen=True)
class DesignKind:
    kind: str = "iid"
    rho: float = 0.0

    def __post_init__(self):
        if self.kind not in ("iid", "binary", "ar1", "equicorrelated"):
            raise ValueError(f"unknown design kind {self.kind!r}")
        if self.kind == "ar1" and not abs(self.rho) < 1:
            raise InvalidRho(f"ar1 needs |rho| < 1, got {self.rho}")
        if self.kind == "equicorrelated" and not 0 <= self.rho < 1:
            raise InvalidRho(f"equicorrelated needs 0 <= rho < 1, got {self.rho}")

    @classmethod
    def parse(cls, text: str) -> "DesignKind":
        """Accepts ``iid``, ``binary``, ``ar1(0.5)``, ``equicorrelated(0.5)``."""
        m = re.fullmatch(r"\s*(\w+)\s*(?:\(\s*([-+0-9.eE]+)\s*\))?\s*", text)
        if not m:
            raise ValueError(f"cannot parse design kind {text!r}")
        name = {"iid_gaussian": "iid", "equi": "equicorrelated"}.get(m.group(1), m.group(1))
        return cls(name, float(m.group(2)) if m.group(2) else (0.5 if name in ("ar1", "equicorrelated") else 0.0))

    def __str__(self):
        return self.kind if self.kind in ("iid", "binary") else f"{self.kind}({self.rho:g})"


def gen_design(kind, n: int, p: int, seed: int, *key: int) -> np.ndarray:
    """An ``n x p`` design with ``E ||x_j||^2 = 1``.

    ``iid`` has N(0, 1/n) entries and ``binary`` has entries +-1/sqrt(n). The
    correlated kinds draw each row from a unit-variance Gaussian with
    correlation ``rho**|i-j|`` (``ar1``) or ``rho`` off the diagonal
    (``equicorrelated``), then scale by ``1/sqrt(n)``.
    """
    if isinstance(kind, str):
        kind = DesignKind.parse(kind)
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    rng = make_rng(seed, DESIGN, *key)
    scale = 1.0 / np.sqrt(n)
    if kind.kind == "binary":
        return np.where(rng.random((n, p)) < 0.5, scale, -scale)
    Z = rng.standard_normal((n, p))
    if kind.kind == "ar1":
        r = kind.rho
        c = np.sqrt(1 - r * r)
        for j in range(1, p):
            Z[:, j] = r * Z[:, j - 1] + c * Z[:, j]
    elif kind.kind == "equicorrelated":
        common = rng.standard_normal((n, 1))
        Z = np.sqrt(kind.rho) * common + np.sqrt(1 - kind.rho) * Z
    return Z * scale


# ---------------------------------------------------------------------------
# signals


def group_sizes(p: int, c) -> np.ndarray:
    """``floor(p * c_d)`` with the remainder given to the last group."""
    c = np.asarray(c, float)
    sizes = np.floor(p * c).astype(int)
    sizes[-1] = p - sizes[:-1].sum()
    if np.any(sizes <= 0):
        raise ValueError(f"p={p} is too small for proportions {c}")
    return sizes


def contiguous_partition(sizes):
    edges = np.concatenate([[0], np.cumsum(sizes)])
    return tuple(np.arange(a, b) for a, b in zip(edges[:-1], edges[1:]))


def _tuple(a):
    return tuple(float(x) for x in np.atleast_1d(a))


def _vec(a, D=None):
    a = np.atleast_1d(np.asarray(a, float))
    return a if D is None else np.broadcast_to(a, (D,)).copy()


@dataclass(frozen=True)
class GroupRecipe:
    """Group ``d`` is zero w.p. ``pi_d`` and ``N(mu_d, s^2)`` otherwise."""

    c: tuple
    pi: tuple
    mu: tuple
    s: float = 0.3

    def __post_init__(self):
        pi = _vec(self.pi)
        if np.any((pi < 0) | (pi > 1)):
            raise ValueError("zero probabilities must lie in [0, 1]")

    def prior(self) -> GroupPrior:
        return GroupPrior.from_arrays(self.c, self.pi, self.mu, self.s)


@dataclass(frozen=True)
class CovariateRecipe:
    """Covariate ``u ~ Uniform(logit pi_lo_d, logit pi_hi_d)`` in group ``d``.

    The coefficient is zero with probability ``expit(u)``. When ``pi_lo``
    exceeds ``pi_hi`` the interval endpoints are swapped.
    """

    c: tuple
    pi_lo: tuple
    pi_hi: tuple
    mu: tuple
    s: float = 0.3

    def __post_init__(self):
        for a in (self.pi_lo, self.pi_hi):
            a = _vec(a)
            if np.any((a < 0) | (a > 1)):
                raise ValueError("probabilities must lie in [0, 1]")

    def bounds(self):
        a = logit(np.clip(_vec(self.pi_lo), _PROB_CLIP, 1 - _PROB_CLIP))
        b = logit(np.clip(_vec(self.pi_hi), _PROB_CLIP, 1 - _PROB_CLIP))
        return np.minimum(a, b), np.maximum(a, b)

    def prior(self) -> CovariatePrior:
        lo, hi = self.bounds()
        c = _vec(self.c)
        return CovariatePrior(c / c.sum(), lo, hi, self.mu, self.s)


def eta_zero_probabilities(p: int, eta: float, odds, c) -> np.ndarray:
    """``min(1, p (1 - eta) O_d / sum_d p_d O_d)``."""
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    odds = _vec(odds)
    if np.any(odds <= 0):
        raise ValueError("odds must be positive")
    sizes = group_sizes(p, c)
    return np.minimum(1.0, p * (1 - eta) * odds / (sizes @ odds))


@dataclass(frozen=True)
class EtaRecipe:
    """Signal fraction ``eta`` spread over groups in proportion to ``1/odds``."""

    eta: float
    odds: tuple
    mu: tuple
    s: float = 0.3
    c: tuple = (0.9, 0.033, 0.033, 0.034)

    def group_recipe(self, p: int) -> GroupRecipe:
        return GroupRecipe(self.c, _tuple(eta_zero_probabilities(p, self.eta, self.odds, self.c)), self.mu, self.s)

    def covariate_recipe(self, p: int, eta_hi: float) -> CovariateRecipe:
        """Covariate version with signal fraction between ``eta`` and ``eta_hi``."""
        lo = eta_zero_probabilities(p, self.eta, self.odds, self.c)
        hi = eta_zero_probabilities(p, eta_hi, self.odds, self.c)
        return CovariateRecipe(self.c, _tuple(lo), _tuple(hi), self.mu, self.s)


FOUR_GROUP_C = (0.9, 0.033, 0.033, 0.034)
GROUP_PRESET = GroupRecipe(FOUR_GROUP_C, (0.9, 0.3, 0.2, 0.1), (0.0, 2.0, -2.0, 4.0), 0.3)
COVARIATE_PRESET = CovariateRecipe(FOUR_GROUP_C, (0.7, 0.1, 0.2, 0.01), (0.95, 0.2, 0.3, 0.05), (0.0, 2.0, -2.0, 4.0), 0.3)

#: (mu, odds) per informativeness level
INFORMATIVENESS = {
    "non": ((0.0, 0.8, -0.8, 1.2), (1.0, 1 / 1.5, 1 / 1.5, 1 / 2)),
    "moderate": ((0.0, 1.5, -1.5, 2.0), (1.0, 1 / 2, 1 / 2, 1 / 4)),
    "high": ((0.0, 2.0, -2.0, 4.0), (1.0, 1 / 4, 1 / 4, 1 / 8)),
}
SIGNAL_FRACTIONS = {"sparse": 0.2, "medium": 0.5, "dense": 0.8}
COVARIATE_SIGNAL_FRACTIONS = {"sparse": (0.15, 0.2), "medium": (0.45, 0.5), "dense": (0.75, 0.8)}


def eta_recipe(informativeness: str, eta: float) -> EtaRecipe:
    mu, odds = INFORMATIVENESS[informativeness]
    return EtaRecipe(eta, odds, mu)


def _mixture(rng, zero_prob, mu, s):
    zero = rng.random(zero_prob.size) < zero_prob
    slab = mu + s * rng.standard_normal(zero_prob.size)
    return np.where(zero, 0.0, slab)


def gen_signal_group(p: int, recipe: GroupRecipe, seed: int, *key: int):
    """Returns ``(beta0, partition)`` with contiguous groups."""
    sizes = group_sizes(p, recipe.c)
    D = sizes.size
    labels = np.repeat(np.arange(D), sizes)
    rng = make_rng(seed, SIGNAL, *key)
    beta = _mixture(rng, _vec(recipe.pi, D)[labels], _vec(recipe.mu, D)[labels], recipe.s)
    return beta, contiguous_partition(sizes)


def gen_signal_covariate(p: int, recipe: CovariateRecipe, seed: int, *key: int):
    """Returns ``(beta0, U, partition)``; ``U`` has shape ``(p, 1)``."""
    sizes = group_sizes(p, recipe.c)
    D = sizes.size
    labels = np.repeat(np.arange(D), sizes)
    lo, hi = recipe.bounds()
    rng = make_rng(seed, SIGNAL, *key)
    u = lo[labels] + (hi - lo)[labels] * rng.random(p)
    beta = _mixture(rng, expit(u), _vec(recipe.mu, D)[labels], recipe.s)
    return beta, u[:, None], contiguous_partition(sizes)


def gen_signal_eta(p: int, eta: float, odds, mu, s: float = 0.3, c=FOUR_GROUP_C, seed: int = 0, *key: int):
    """Group signal whose expected nonzero fraction is ``eta`` (before clipping)."""
    recipe = EtaRecipe(eta, _tuple(odds), _tuple(mu), s, _tuple(c))
    return gen_signal_group(p, recipe.group_recipe(p), seed, *key)


def gen_response(X, beta0, sigma2: float, seed: int, *key: int) -> np.ndarray:
    """``y = X beta0 + eps`` with ``eps ~ N(0, sigma2)``."""
    X = np.asarray(X, float)
    beta0 = np.asarray(beta0, float)
    if X.shape[1] != beta0.size:
        raise DimensionMismatch(f"X has {X.shape[1]} columns, beta0 has {beta0.size}")
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    mean = X @ beta0
    if sigma2 == 0:
        return mean
    return mean + np.sqrt(sigma2) * make_rng(seed, NOISE, *key).standard_normal(X.shape[0])


@dataclass(frozen=True)
class Instance:
    """A simulated regression problem with its generating structure."""

    X: np.ndarray
    y: np.ndarray
    beta0: np.ndarray
    partition: tuple
    U: np.ndarray = field(default=None, repr=False)
    sigma2: float = 0.0


def simulate(structure: str, n: int, p: int, sigma2: float, seed: int, *key: int, design="iid", recipe=None) -> Instance:
    """Design, signal and response in one call (streams keyed by ``key``)."""
    if structure == "group":
        beta0, part = gen_signal_group(p, recipe or GROUP_PRESET, seed, *key)
        U = None
    elif structure == "covariate":
        beta0, U, part = gen_signal_covariate(p, recipe or COVARIATE_PRESET, seed, *key)
    else:
        raise ValueError(f"unknown structure {structure!r}")
    X = gen_design(design, n, p, seed, *key)
    y = gen_response(X, beta0, sigma2, seed, *key)
    return Instance(X, y, beta0, part, U, sigma2)
