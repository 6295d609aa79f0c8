"""Shared data model: datasets, structures, weights, priors and solver settings.

All containers are frozen dataclasses holding numpy arrays. Arrays are
copied and marked read-only on construction so that validated objects can be
shared across worker threads without defensive copies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

#: Default weight cap. A weight at the cap removes a coefficient from the fit.
C_U = 1e30


class SalassoError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(SalassoError, ValueError):
    pass


class NonFiniteEntry(SalassoError, ValueError):
    pass


class PartitionError(SalassoError, ValueError):
    pass


class OverlappingGroups(PartitionError):
    pass


class UncoveredIndex(PartitionError):
    pass


class EmptyGroup(PartitionError):
    pass


class GammaOutOfRange(SalassoError, ValueError):
    pass


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not (0.0 < gamma <= 1.0):
        raise GammaOutOfRange(f"gamma must lie in (0, 1], got {gamma}")
    return gamma


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class LinearDataset:
    """Response ``y`` (n,), design ``X`` (n, p) and optional ground truth."""

    y: np.ndarray
    X: np.ndarray
    beta_true: Optional[np.ndarray] = None
    sigma2: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "y", _frozen(self.y))
        # Fortran order: the coordinate-descent solver walks columns.
        X = np.asfortranarray(np.array(self.X, dtype=float, copy=True))
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        if self.beta_true is not None:
            object.__setattr__(self, "beta_true", _frozen(self.beta_true))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def delta(self) -> float:
        return self.n / self.p

    def subset(self, rows) -> "LinearDataset":
        """Row subset, keeping the ground truth."""
        rows = np.asarray(rows)
        return LinearDataset(self.y[rows], self.X[rows], self.beta_true, self.sigma2)


def validate_dataset(ds: LinearDataset) -> LinearDataset:
    """Return ``ds`` unchanged if shapes agree and every entry is finite."""
    if ds.X.ndim != 2:
        raise DimensionMismatch(f"X must be 2-D, got shape {ds.X.shape}")
    if ds.y.ndim != 1:
        raise DimensionMismatch(f"y must be 1-D, got shape {ds.y.shape}")
    n, p = ds.X.shape
    if n < 1 or p < 1:
        raise DimensionMismatch(f"empty design of shape {ds.X.shape}")
    if ds.y.shape[0] != n:
        raise DimensionMismatch(f"len(y)={ds.y.shape[0]} but X has {n} rows")
    if ds.beta_true is not None and ds.beta_true.shape != (p,):
        raise DimensionMismatch(
            f"beta_true has shape {ds.beta_true.shape}, expected ({p},)"
        )
    for name, arr in (("y", ds.y), ("X", ds.X), ("beta_true", ds.beta_true)):
        if arr is not None and not np.all(np.isfinite(arr)):
            raise NonFiniteEntry(f"{name} contains non-finite values")
    if ds.sigma2 is not None and not (np.isfinite(ds.sigma2) and ds.sigma2 >= 0):
        raise NonFiniteEntry(f"sigma2 must be finite and >= 0, got {ds.sigma2}")
    return ds


# ---------------------------------------------------------------------------
# structures


def validate_partition(partition: Sequence[Sequence[int]], p: int) -> tuple:
    """Check that ``partition`` splits ``range(p)`` into disjoint nonempty blocks.

    Indices are 0-based. Returns the partition as a tuple of sorted int arrays.
    """
    seen = np.full(p, -1, dtype=int)
    blocks = []
    for d, block in enumerate(partition):
        idx = np.asarray(list(block), dtype=int).ravel()
        if idx.size == 0:
            raise EmptyGroup(f"group {d} is empty")
        if np.any((idx < 0) | (idx >= p)):
            raise PartitionError(f"group {d} has indices outside [0, {p})")
        if np.unique(idx).size != idx.size:
            raise OverlappingGroups(f"group {d} repeats an index")
        clash = seen[idx] >= 0
        if np.any(clash):
            j = int(idx[clash][0])
            raise OverlappingGroups(
                f"index {j} belongs to groups {int(seen[j])} and {d}"
            )
        seen[idx] = d
        blocks.append(_frozen(np.sort(idx), dtype=int))
    missing = np.flatnonzero(seen < 0)
    if missing.size:
        raise UncoveredIndex(f"indices not covered by any group: {missing[:10].tolist()}")
    return tuple(blocks)


def group_labels(partition, p: int) -> np.ndarray:
    """Per-feature group index for a validated partition."""
    labels = np.empty(p, dtype=int)
    for d, block in enumerate(partition):
        labels[block] = d
    return labels


@dataclass(frozen=True)
class StructureSpec:
    """External information on the coefficients.

    Exactly one of ``partition`` (group structure) or ``U`` (covariate
    structure, shape (p, q)) is set, or neither for the unstructured case.
    """

    kind: str = "none"
    partition: Optional[tuple] = None
    U: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("group", "covariate", "none"):
            raise ValueError(f"unknown structure kind {self.kind!r}")
        if self.kind == "group" and self.partition is None:
            raise ValueError("group structure needs a partition")
        if self.kind == "covariate":
            if self.U is None:
                raise ValueError("covariate structure needs U")
            U = np.array(self.U, dtype=float, copy=True)
            if U.ndim == 1:
                U = U[:, None]
            U.setflags(write=False)
            object.__setattr__(self, "U", U)

    @classmethod
    def group(cls, partition, p: int) -> "StructureSpec":
        return cls("group", partition=validate_partition(partition, p))

    @classmethod
    def covariate(cls, U) -> "StructureSpec":
        spec = cls("covariate", U=U)
        if not np.all(np.isfinite(spec.U)):
            raise NonFiniteEntry("covariate matrix contains non-finite values")
        return spec

    @classmethod
    def none(cls) -> "StructureSpec":
        return cls("none")

    def validate(self, p: int) -> "StructureSpec":
        if self.kind == "group":
            validate_partition(self.partition, p)
        elif self.kind == "covariate" and self.U.shape[0] != p:
            raise DimensionMismatch(f"U has {self.U.shape[0]} rows, expected {p}")
        return self


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class WeightVector:
    """Penalty multipliers, clipped to ``[0, cap]`` on construction."""

    w: np.ndarray
    cap: float = C_U

    def __post_init__(self):
        if not self.cap > 0:
            raise ValueError(f"cap must be positive, got {self.cap}")
        w = np.asarray(self.w, dtype=float)
        if np.any(np.isnan(w)):
            raise NonFiniteEntry("weights contain NaN")
        object.__setattr__(self, "w", _frozen(np.clip(w, 0.0, self.cap)))

    @classmethod
    def ones(cls, p: int, cap: float = C_U) -> "WeightVector":
        return cls(np.ones(p), cap)

    def __len__(self) -> int:
        return self.w.shape[0]


# ---------------------------------------------------------------------------
# priors


@dataclass(frozen=True)
class PointNormal:
    """Law ``pi * delta_0 + (1 - pi) * N(mu, s^2)``."""

    pi: float
    mu: float
    s: float

    def __post_init__(self):
        if not 0.0 <= self.pi <= 1.0:
            raise ValueError(f"pi must be in [0, 1], got {self.pi}")
        if not self.s > 0:
            raise ValueError(f"slab sd must be positive, got {self.s}")

    @property
    def second_moment(self) -> float:
        return (1.0 - self.pi) * (self.mu**2 + self.s**2)


@dataclass(frozen=True)
class GroupPrior:
    """Mixture ``sum_d c_d * PointNormal_d`` describing the limiting law of B0."""

    c: np.ndarray
    components: tuple

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 1 or c.size != len(self.components):
            raise DimensionMismatch("need one proportion per component")
        if np.any(c <= 0) or np.any(c > 1):
            raise ValueError("proportions must lie in (0, 1]")
        if abs(c.sum() - 1.0) > 1e-12:
            raise ValueError(f"proportions sum to {c.sum()!r}, not 1")
        object.__setattr__(self, "c", _frozen(c))
        object.__setattr__(self, "components", tuple(self.components))

    @classmethod
    def from_arrays(cls, c, pi, mu, s) -> "GroupPrior":
        c = np.asarray(c, dtype=float)
        c = c / c.sum()
        D = c.size
        pi, mu, s = (np.broadcast_to(np.asarray(a, dtype=float), (D,)) for a in (pi, mu, s))
        return cls(c, tuple(PointNormal(float(a), float(b), float(e)) for a, b, e in zip(pi, mu, s)))

    @classmethod
    def single(cls, pi: float, mu: float = 0.0, s: float = 1.0) -> "GroupPrior":
        return cls(np.ones(1), (PointNormal(pi, mu, s),))

    @property
    def D(self) -> int:
        return len(self.components)

    @property
    def second_moment(self) -> float:
        return float(sum(c * comp.second_moment for c, comp in zip(self.c, self.components)))


@dataclass(frozen=True)
class CovariatePrior:
    """Joint law of (U, B0) for the covariate-linked signal recipe.

    Group ``d`` (probability ``c_d``) draws ``u ~ Uniform(lo_d, hi_d)``; given
    ``u`` the coefficient is 0 with probability ``1 / (1 + exp(-u))`` and
    ``N(mu_d, s^2)`` otherwise.
    """

    c: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    mu: np.ndarray
    s: float

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if abs(c.sum() - 1.0) > 1e-12:
            raise ValueError(f"proportions sum to {c.sum()!r}, not 1")
        D = c.size
        for name in ("lo", "hi", "mu"):
            a = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (D,))
            object.__setattr__(self, name, _frozen(a))
        if np.any(self.lo > self.hi):
            raise ValueError("need lo <= hi per group")
        if not self.s > 0:
            raise ValueError("slab sd must be positive")
        object.__setattr__(self, "c", _frozen(c))

    @classmethod
    def from_probabilities(cls, c, pi_lo, pi_hi, mu, s) -> "CovariatePrior":
        from scipy.special import logit

        c = np.asarray(c, dtype=float)
        return cls(c / c.sum(), logit(np.asarray(pi_lo, float)), logit(np.asarray(pi_hi, float)), mu, s)

    @property
    def D(self) -> int:
        return self.c.size

    def sample(self, size: int, rng: np.random.Generator):
        """Draw group labels and covariates ``(d, u)``; stratified by ``c``."""
        counts = np.floor(self.c * size).astype(int)
        counts[-1] = size - counts[:-1].sum()
        d = np.repeat(np.arange(self.D), counts)
        u = self.lo[d] + (self.hi[d] - self.lo[d]) * rng.random(size)
        return d, u

    def slab_probabilities(self) -> np.ndarray:
        """``E[1 - expit(u)]`` per group, in closed form."""
        from scipy.special import expit

        q = np.empty(self.D)
        for d in range(self.D):
            lo, hi = self.lo[d], self.hi[d]
            if hi - lo < 1e-12:
                q[d] = 1.0 - expit(lo)
            else:
                # integral of expit(-u) = -log(1 + exp(-u))
                q[d] = (np.logaddexp(0.0, -lo) - np.logaddexp(0.0, -hi)) / (hi - lo)
        return q

    def marginal(self) -> GroupPrior:
        """Law of B0 alone: within a group the zero probability averages over u."""
        return GroupPrior.from_arrays(self.c, 1.0 - self.slab_probabilities(), self.mu, self.s)

    @property
    def second_moment(self) -> float:
        q = self.slab_probabilities()
        return float(np.sum(self.c * q * (self.mu**2 + self.s**2)))


# ---------------------------------------------------------------------------
# solver settings


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-7
    max_iter: int = 100_000
    gamma: float = 1.0
    lam: float = 0.0
    seed: int = 0
    cap: float = C_U

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        _check_gamma(self.gamma)
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
