"""Alternating A-Lasso / weight-update iterations and their cross-validation.

Iteration 0 is a plain lasso (all weights 1). Iteration ``t >= 1`` first
recomputes the weights from the previous coefficients with the update that
matches the structure, then solves the weighted lasso. The joint objective

    Q(b, w) = (2n)^{-1} ||y - X b||^2 + lam * sum_j [w_j |b_j| - log g(w_j; gamma)]

is recorded after every iteration. ``log g`` omits its additive constant,
so ``Q`` values are comparable only across iterations that share a gamma.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .model import C_U, LinearDataset, SalassoError, SolverConfig, StructureSpec, WeightVector, _check_gamma
from .prox import fit_weighted_lasso, lambda_max
from .sim import FOLDS, make_rng
from .weights import DEFAULT_BOX, _GAMMA_ONE, update_weights


class FoldTooSmall(SalassoError, ValueError):
    pass


def log_g(w, gamma: float) -> np.ndarray:
    """``w**(1 - 1/gamma) / (1 - 1/gamma)``, or ``log w`` at ``gamma = 1``."""
    w = np.asarray(w, float)
    if abs(1.0 - gamma) < _GAMMA_ONE:
        return np.log(w)
    k = 1.0 - 1.0 / gamma
    return w**k / k


def joint_objective(ds: LinearDataset, beta, w, lam: float, gamma: float) -> float:
    w = w.w if isinstance(w, WeightVector) else np.asarray(w, float)
    r = ds.y - ds.X @ beta
    nz = beta != 0
    pen = np.sum(w[nz] * np.abs(beta[nz])) - np.sum(log_g(w, gamma))
    return float(r @ r / (2 * ds.n) + lam * pen)


@dataclass(frozen=True)
class IterationRecord:
    t: int
    beta: np.ndarray
    weights: WeightVector
    objective: float
    lam: float
    gamma: float
    converged: bool = True


@dataclass(frozen=True)
class SalassoTrajectory:
    records: tuple

    @property
    def beta(self) -> np.ndarray:
        return self.records[-1].beta

    @property
    def weights(self) -> WeightVector:
        return self.records[-1].weights

    @property
    def T(self) -> int:
        return len(self.records) - 1

    def __len__(self):
        return len(self.records)

    def __getitem__(self, t) -> IterationRecord:
        return self.records[t]


def _schedule(value, T, name):
    arr = np.atleast_1d(np.asarray(value, float))
    if arr.size == 1:
        return np.full(T + 1, arr[0])
    if arr.size != T + 1:
        raise ValueError(f"{name} schedule must have length T + 1 = {T + 1}")
    return arr


def fit_salasso(
    ds: LinearDataset,
    structure: Optional[StructureSpec] = None,
    T: int = 1,
    lam=0.0,
    gamma=1.0,
    cfg: Optional[SolverConfig] = None,
    box=DEFAULT_BOX,
) -> SalassoTrajectory:
    """Run ``T`` weight-update iterations after an initial lasso.

    Parameters
    ----------
    ds : LinearDataset
    structure : StructureSpec, optional
        ``None`` means unstructured (adaptive-lasso) weights.
    T : int
        Number of weight updates, ``>= 1``.
    lam, gamma : float or sequence of length T + 1
        Penalty level and weight exponent per iteration. ``gamma[0]`` only
        enters the recorded objective of iteration 0.
    cfg : SolverConfig, optional
    box : float or (lower, upper)
        Bounds for covariate link parameters.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    cfg = cfg or SolverConfig()
    structure = (structure or StructureSpec.none()).validate(ds.p)
    lams = _schedule(lam, T, "lambda")
    gammas = _schedule(gamma, T, "gamma")
    for g in gammas:
        _check_gamma(g)

    w = WeightVector.ones(ds.p, cfg.cap)
    fit = fit_weighted_lasso(ds, w, lams[0], cfg)
    records = [IterationRecord(0, fit.beta, w, joint_objective(ds, fit.beta, w, lams[0], gammas[0]), lams[0], gammas[0], fit.converged)]
    for t in range(1, T + 1):
        w = update_weights(fit.beta, structure, gammas[t], cfg.cap, box)
        fit = fit_weighted_lasso(ds, w, lams[t], cfg, warm_start=fit.beta)
        q = joint_objective(ds, fit.beta, w, lams[t], gammas[t])
        records.append(IterationRecord(t, fit.beta, w, q, lams[t], gammas[t], fit.converged))
    return SalassoTrajectory(tuple(records))


# ---------------------------------------------------------------------------
# cross-validation


def default_lambda_grid(ds: LinearDataset, w=None, n_lambda: int = 50, ratio: float = 1e-3) -> np.ndarray:
    """Log-spaced, descending from ``lambda_max`` to ``ratio * lambda_max``."""
    top = lambda_max(ds, w)
    if top == 0:
        top = 1.0
    return np.geomspace(top, ratio * top, n_lambda)


DEFAULT_GAMMA_GRID = np.round(np.arange(1, 21) * 0.05, 2)


def fold_assignment(n: int, k: int, seed: int) -> List[np.ndarray]:
    """Held-out index sets from a seeded permutation, sizes differing by at most one."""
    if k < 2:
        raise ValueError("need at least 2 folds")
    if k > n:
        raise FoldTooSmall(f"{k} folds but only {n} observations")
    if n - (-(-n // k)) < 2:
        raise FoldTooSmall("a training split would have fewer than 2 observations")
    perm = make_rng(seed, FOLDS).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


@dataclass(frozen=True)
class CvStage:
    """CV surface for one iteration.

    ``lambda_grid`` has shape ``(G, L)``: row ``g`` is the lambda grid used
    with ``gamma_grid[g]``. ``fold_errors`` has shape ``(k, G, L)``.
    """

    t: int
    lambda_grid: np.ndarray
    gamma_grid: np.ndarray
    fold_errors: np.ndarray = field(repr=False)
    lam: float
    gamma: float

    @property
    def mean_error(self) -> np.ndarray:
        return self.fold_errors.mean(axis=0)


@dataclass(frozen=True)
class CvResult:
    stages: tuple
    trajectory: SalassoTrajectory
    folds: tuple = field(repr=False)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([s.lam for s in self.stages])

    @property
    def gammas(self) -> np.ndarray:
        return np.array([s.gamma for s in self.stages])

    @property
    def selected(self):
        """``(lambda, gamma)`` chosen at the last iteration."""
        return self.stages[-1].lam, self.stages[-1].gamma

    @property
    def lambda_grid(self):
        return self.stages[-1].lambda_grid

    @property
    def gamma_grid(self):
        return self.stages[-1].gamma_grid

    @property
    def mean_error(self):
        return self.stages[-1].mean_error


def select_point(lambda_grid: np.ndarray, gamma_grid: np.ndarray, mean_error: np.ndarray):
    """Index ``(g, l)`` of the minimum; ties go to smallest lambda, smallest gamma, first index."""
    best = np.nanmin(mean_error)
    G, L = mean_error.shape
    cands = [(lambda_grid[g, l], gamma_grid[g], g * L + l) for g in range(G) for l in range(L) if mean_error[g, l] == best]
    _, _, flat = min(cands)
    return divmod(flat, L)


def _path_errors(train: LinearDataset, test: LinearDataset, w, grid, cfg):
    """Held-out MSE and coefficients along a warm-started path (grid order preserved)."""
    order = np.argsort(-grid, kind="stable")
    errs = np.empty(grid.size)
    betas = np.empty((grid.size, train.p))
    beta = None
    for i in order:
        fit = fit_weighted_lasso(train, w, grid[i], cfg, warm_start=beta)
        beta = fit.beta
        r = test.y - test.X @ beta
        errs[i] = r @ r / test.n
        betas[i] = beta
    return errs, betas


def cross_validate(
    ds: LinearDataset,
    structure: Optional[StructureSpec] = None,
    lambda_grid: Optional[Sequence[float]] = None,
    gamma_grid: Optional[Sequence[float]] = None,
    k: int = 10,
    T: int = 1,
    cfg: Optional[SolverConfig] = None,
    box=DEFAULT_BOX,
    threads: int = 1,
    refine_gamma: bool = False,
    n_lambda: int = 50,
    lambda_ratio: float = 1e-3,
) -> CvResult:
    """Choose lambda at iteration 0, then (lambda, gamma) at every later iteration.

    Each iteration's choice minimises the mean held-out squared prediction
    error over ``k`` folds. Weights inside a fold are learned from that
    fold's own coefficients at the previous iteration's chosen settings.
    With ``lambda_grid=None`` the grid at each (iteration, gamma) is
    ``n_lambda`` log-spaced values from ``lambda_max`` of the full data down
    to ``lambda_ratio`` times it, under the weights
    implied by the full-data fit so far. ``refine_gamma`` adds a pass over
    gamma in steps of 0.01 around the coarse winner.

    The final trajectory refits the whole sequence of choices on all data.
    """
    cfg = cfg or SolverConfig()
    structure = (structure or StructureSpec.none()).validate(ds.p)
    gamma_grid = DEFAULT_GAMMA_GRID if gamma_grid is None else np.asarray(gamma_grid, float)
    if gamma_grid.size == 0:
        raise ValueError("gamma grid is empty")
    for g in gamma_grid:
        _check_gamma(g)
    user_grid = None if lambda_grid is None else np.asarray(lambda_grid, float)
    if user_grid is not None and user_grid.size == 0:
        raise ValueError("lambda grid is empty")

    folds = fold_assignment(ds.n, k, cfg.seed)
    splits = []
    for f in folds:
        mask = np.ones(ds.n, bool)
        mask[f] = False
        splits.append((ds.subset(np.flatnonzero(mask)), ds.subset(f)))

    pool = ThreadPoolExecutor(max_workers=max(1, threads))

    def run_stage(t, gammas, full_beta, fold_betas):
        grids, weights_full = [], []
        for g in gammas:
            w_full = WeightVector.ones(ds.p, cfg.cap) if t == 0 else update_weights(full_beta, structure, g, cfg.cap, box)
            grids.append(default_lambda_grid(ds, w_full, n_lambda, lambda_ratio) if user_grid is None else user_grid)
        grids = np.array(grids)

        def job(i):
            train, test = splits[i]
            errs = np.empty(grids.shape)
            betas = []
            for gi, g in enumerate(gammas):
                w = WeightVector.ones(ds.p, cfg.cap) if t == 0 else update_weights(fold_betas[i], structure, g, cfg.cap, box)
                errs[gi], b = _path_errors(train, test, w, grids[gi], cfg)
                betas.append(b)
            return errs, betas

        out = list(pool.map(job, range(len(splits))))
        return grids, np.stack([o[0] for o in out]), [o[1] for o in out]

    stages = []
    lams, gams = [], []
    full_beta = None
    fold_betas = [None] * len(splits)
    try:
        for t in range(T + 1):
            gammas = np.array([1.0]) if t == 0 else gamma_grid
            grids, errs, betas = run_stage(t, gammas, full_beta, fold_betas)
            gi, li = select_point(grids, gammas, errs.mean(axis=0))
            if refine_gamma and t > 0 and gammas.size > 1:
                g0 = gammas[gi]
                fine = np.round(np.arange(g0 - 0.04, g0 + 0.0401, 0.01), 2)
                fine = fine[(fine > 0) & (fine <= 1)]
                grids2, errs2, betas2 = run_stage(t, fine, full_beta, fold_betas)
                grids = np.vstack([grids, grids2])
                gammas = np.concatenate([gammas, fine])
                errs = np.concatenate([errs, errs2], axis=1)
                betas = [a + b for a, b in zip(betas, betas2)]
                gi, li = select_point(grids, gammas, errs.mean(axis=0))
            lam, gam = float(grids[gi, li]), float(gammas[gi])
            stages.append(CvStage(t, grids, gammas, errs, lam, gam))
            lams.append(lam)
            gams.append(gam)
            fold_betas = [betas[i][gi][li] for i in range(len(splits))]
            # full-data fit so far, used for the next stage's default grids
            if t == 0:
                full_beta = fit_weighted_lasso(ds, None, lam, cfg).beta
            else:
                w = update_weights(full_beta, structure, gam, cfg.cap, box)
                full_beta = fit_weighted_lasso(ds, w, lam, cfg, warm_start=full_beta).beta
    finally:
        pool.shutdown()

    traj = fit_salasso(ds, structure, T, lams, gams, cfg, box)
    return CvResult(tuple(stages), traj, tuple(folds))
