"""Experiment harness: configuration, simulation sweeps and their CSV/JSON output.

Every experiment produces a list of :class:`~salasso.metrics.MetricsRow`
in a fixed order (replicates in index order, grid points in grid order),
whatever the worker count, so the written files are deterministic. The
``lambda`` column is always on the solver scale, i.e. the penalty in
``(2n)^-1 ||y - X b||^2 + lambda sum_j w_j |b_j|``.
"""

from __future__ import annotations

import dataclasses
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Dict, List, Tuple

import numpy as np

from . import state_evolution as se
from .amp import amp_lasso
from .fit import cross_validate, fit_salasso
from .metrics import MetricsRow, mcc, mse, summarize, write_metrics_csv, write_summary_json
from .model import GroupPrior, LinearDataset, SolverConfig, StructureSpec
from .prox import fit_weighted_lasso
from .sim import COVARIATE_PRESET, COVARIATE_SIGNAL_FRACTIONS, GROUP_PRESET, INFORMATIVENESS, eta_recipe, simulate
from .weights import update_weights

class ConfigError(ValueError):
    """Invalid experiment configuration."""


KINDS = ("se_sweep", "amp_vs_solver", "fig1", "t_robustness", "sweep")


@dataclass
class ExperimentConfig:
    kind: str = "fig1"
    design: str = "iid"
    structure: str = "group"
    preset: str = "default"
    p: int = 500
    delta: Tuple[float, ...] = (0.64,)
    sigma2: float = 0.2
    alphas: Tuple[float, ...] = ()
    n_points: int = 20
    gamma: float = 1.0
    gamma_grid: Tuple[float, ...] = ()
    n_lambda: int = 50
    lambda_ratio: float = 1e-3
    folds: int = 10
    T: Tuple[int, ...] = (1, 10)
    replications: int = 20
    seed: int = 0
    n_mc: int = 100_000
    threads: int = 1
    out: str = "results"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose from {', '.join(KINDS)}")
        if self.structure not in ("group", "covariate", "null"):
            raise ConfigError(f"unknown structure {self.structure!r}")
        if self.structure == "null" and self.kind != "se_sweep":
            raise ConfigError("structure 'null' (B0 = 0) is only available for se_sweep")
        if not self.delta or any(d <= 0 for d in self.delta):
            raise ConfigError("delta must be a nonempty list of positive values")
        if self.replications < 1 or self.folds < 2 or self.p < 1 or self.sigma2 < 0:
            raise ConfigError("need replications >= 1, folds >= 2, p >= 1 and sigma2 >= 0")
        if not self.T or min(self.T) < 1:
            raise ConfigError("T values must be at least 1")
        try:
            resolve_preset(self.structure, self.preset, self.p)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_mapping(cls, values: Dict[str, object]) -> "ExperimentConfig":
        kw = {}
        types = {f.name: f for f in fields(cls)}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in types:
                raise ConfigError(f"unknown configuration key {key!r}")
            try:
                kw[key] = _coerce(raw, types[key].default)
            except ValueError:
                raise ConfigError(f"bad value {raw!r} for {key!r}") from None
        return cls(**kw)

    def dump(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ", ".join(format(x, "g") if isinstance(x, float) else str(x) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def _coerce(raw, default):
    if isinstance(default, tuple):
        if isinstance(raw, (list, tuple)):
            items = list(raw)
        else:
            items = [s for s in str(raw).replace(",", " ").split()]
        kind = int if default and isinstance(default[0], int) else float
        return tuple(kind(x) for x in items)
    if isinstance(raw, str):
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(float(raw)) if float(raw).is_integer() else int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw.strip()
    return type(default)(raw) if default is not None else raw


def parse_config_text(text: str) -> Dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_mapping(parse_config_text(Path(path).read_text()))


# ---------------------------------------------------------------------------
# presets


def resolve_preset(structure: str, preset: str, p: int):
    """Recipe for simulation plus the matching limiting prior.

    ``preset`` is ``default`` (the four-group setups) or
    ``<informativeness>:<sparse|medium|dense>`` such as ``high:sparse``.
    """
    if structure == "null":
        return None, GroupPrior.single(1.0, 0.0, 1.0)
    if preset == "default":
        rec = GROUP_PRESET if structure == "group" else COVARIATE_PRESET
        return rec, rec.prior()
    try:
        info, frac = preset.split(":")
        mu, _ = INFORMATIVENESS[info]
    except (ValueError, KeyError):
        raise ValueError(f"unknown preset {preset!r}") from None
    if frac not in COVARIATE_SIGNAL_FRACTIONS:
        raise ValueError(f"unknown signal fraction {frac!r}")
    eta_lo, eta_hi = COVARIATE_SIGNAL_FRACTIONS[frac]
    if structure == "group":
        from .sim import SIGNAL_FRACTIONS

        rec = eta_recipe(info, SIGNAL_FRACTIONS[frac]).group_recipe(p)
    else:
        rec = eta_recipe(info, eta_lo).covariate_recipe(p, eta_hi)
    return rec, rec.prior()


def _structure_spec(inst, structure):
    if structure == "group":
        return StructureSpec.group(inst.partition, inst.X.shape[1])
    return StructureSpec.covariate(inst.U)


def _pmap(fn: Callable, items, threads: int) -> list:
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# state-evolution pieces shared by several experiments


@dataclass(frozen=True)
class SEPipeline:
    """Lasso-optimal alpha, the induced structure weights and an SE-trace factory."""

    lasso_opt: se.SETrace
    omega: np.ndarray = None
    tau_min: object = None
    sa_trace: Callable = field(default=None, repr=False)
    lasso_trace: Callable = field(default=None, repr=False)


def se_pipeline(structure: str, prior, sigma2: float, delta: float, gamma: float = 1.0, quad=None) -> SEPipeline:
    quad = quad or se.QuadratureSpec()
    if structure == "covariate":
        # with constant thresholds only the marginal law of B0 matters
        marginal = prior.marginal()

        def lasso_trace(a):
            return se.se_lasso(marginal, sigma2, delta, a, quad)

        opt = se.optimal_alpha(lasso_trace)
        tau_min = se.asymptotic_tau_covariate(prior, opt.tau_star, opt.alpha, gamma, quad)
        return SEPipeline(opt, None, tau_min, lambda a: se.se_salasso_covariate(prior, tau_min, sigma2, delta, a, quad), lasso_trace)

    def lasso_trace(a):
        return se.se_lasso(prior, sigma2, delta, a, quad)

    opt = se.optimal_alpha(lasso_trace)
    omega = se.asymptotic_weights_group(prior, opt.tau_star, opt.alpha, gamma, quad)
    return SEPipeline(opt, omega, None, lambda a: se.se_salasso_group(prior, omega, sigma2, delta, a, quad), lasso_trace)


def positive_lambda_traces(make_trace, alphas):
    """Traces at the given alphas, dropping those with no fixed point or lambda <= 0."""
    _, traces = se.risk_curve(make_trace, alphas)
    return traces


def default_alphas(n_points: int):
    return np.linspace(se.ALPHA_GRID[0], se.ALPHA_GRID[-1], n_points)


# ---------------------------------------------------------------------------
# experiments


def run_se_sweep(cfg: ExperimentConfig) -> List[MetricsRow]:
    """Predicted risk and implied lambda along an alpha grid, per delta.

    Lambda is reported on the solver scale for ``n = round(delta * p)``.
    """
    _, prior = resolve_preset(cfg.structure, cfg.preset, cfg.p)
    quad = se.QuadratureSpec(n_mc=cfg.n_mc, seed=cfg.seed)
    alphas = np.asarray(cfg.alphas or default_alphas(cfg.n_points), float)
    rows = []

    def one(delta):
        n = round(delta * cfg.p)
        out = []
        if cfg.structure == "null":
            for a in alphas:
                tr = se.se_lasso(prior, cfg.sigma2, delta, a, quad)
                out.append(MetricsRow("se_lasso", -1, delta, tr.implied_lambda / n, mse=tr.predicted_risk, seed=cfg.seed, extra={"alpha": a, "tau_star": tr.tau_star}))
            return out
        pipe = se_pipeline(cfg.structure, prior, cfg.sigma2, delta, cfg.gamma, quad)
        for name, make in (("se_lasso", pipe.lasso_trace), ("se_salasso", pipe.sa_trace)):
            for tr in positive_lambda_traces(make, alphas):
                out.append(MetricsRow(name, -1, delta, tr.implied_lambda / n, cfg.gamma, mse=tr.predicted_risk, seed=cfg.seed, extra={"alpha": tr.alpha, "tau_star": tr.tau_star}))
        return out

    for block in _pmap(one, cfg.delta, cfg.threads):
        rows.extend(block)
    return rows


def run_amp_vs_solver(cfg: ExperimentConfig) -> List[MetricsRow]:
    """Lasso AMP fixed point against the direct solver at the SE-implied lambda."""
    rec, prior = resolve_preset(cfg.structure, cfg.preset, cfg.p)
    quad = se.QuadratureSpec(n_mc=cfg.n_mc, seed=cfg.seed)
    alphas = np.asarray(cfg.alphas or (1.5, 1.75, 2.0, 2.5, 3.0), float)
    solver = SolverConfig(tol=1e-10)
    rows = []
    for delta in cfg.delta:
        n = round(delta * cfg.p)
        if cfg.structure == "covariate":
            lams = [se.lambda_of_alpha_lasso(a, prior.marginal(), cfg.sigma2, delta, quad) for a in alphas]
        else:
            lams = [se.lambda_of_alpha_lasso(a, prior, cfg.sigma2, delta, quad) for a in alphas]

        def one(r):
            inst = simulate(cfg.structure, n, cfg.p, cfg.sigma2, cfg.seed, r, design=cfg.design, recipe=rec)
            ds = LinearDataset(inst.y, inst.X)
            out = []
            for a, lam in zip(alphas, lams):
                t0 = time.perf_counter()
                res = amp_lasso(ds, a)
                fit = fit_weighted_lasso(ds, None, lam / n, solver)
                dt = 1e3 * (time.perf_counter() - t0)
                rel = np.linalg.norm(res.beta - fit.beta) / max(np.linalg.norm(fit.beta), np.finfo(float).tiny)
                out.append(
                    MetricsRow(
                        "amp_lasso", r, delta, lam / n, mse=mse(res.beta, inst.beta0), mcc=mcc(res.beta != 0, inst.beta0 != 0),
                        wall_time_ms=dt, seed=cfg.seed,
                        extra={"alpha": a, "rel_l2_discrepancy": rel, "solver_mse": mse(fit.beta, inst.beta0), "amp_lambda": res.solver_lambda()},
                    )
                )
            return out

        for block in _pmap(one, range(cfg.replications), cfg.threads):
            rows.extend(block)
    return rows


def run_fig1(cfg: ExperimentConfig) -> List[MetricsRow]:
    """Finite-sample lasso / SA-lasso MSE and their SE predictions along lambda.

    The lasso curve uses ``lambda(alpha_L)`` over the alpha grid. The
    SA-lasso fixes ``alpha_L`` at the SE-optimal value, learns weights from
    the finite-sample lasso there (one weight update, exponent ``gamma``),
    and refits at ``lambda(alpha)`` of the structured state evolution.
    Methods: ``lasso``, ``se_lasso``, ``salasso``, ``se_salasso``.
    """
    rec, prior = resolve_preset(cfg.structure, cfg.preset, cfg.p)
    quad = se.QuadratureSpec(n_mc=cfg.n_mc, seed=cfg.seed)
    alphas = np.asarray(cfg.alphas or default_alphas(cfg.n_points), float)
    rows = []
    for delta in cfg.delta:
        n = round(delta * cfg.p)
        pipe = se_pipeline(cfg.structure, prior, cfg.sigma2, delta, cfg.gamma, quad)
        lasso_tr = positive_lambda_traces(pipe.lasso_trace, alphas)
        sa_tr = positive_lambda_traces(pipe.sa_trace, alphas)
        for name, trs in (("se_lasso", lasso_tr), ("se_salasso", sa_tr)):
            for tr in trs:
                rows.append(MetricsRow(name, -1, delta, tr.implied_lambda / n, cfg.gamma, mse=tr.predicted_risk, seed=cfg.seed, extra={"alpha": tr.alpha}))
        lam_L = pipe.lasso_opt.implied_lambda

        def one(r):
            inst = simulate(cfg.structure, n, cfg.p, cfg.sigma2, cfg.seed, r, design=cfg.design, recipe=rec)
            ds = LinearDataset(inst.y, inst.X)
            truth = inst.beta0 != 0
            out = []
            beta = None
            for tr in lasso_tr:
                t0 = time.perf_counter()
                beta = fit_weighted_lasso(ds, None, tr.implied_lambda / n, warm_start=beta).beta
                out.append(MetricsRow("lasso", r, delta, tr.implied_lambda / n, mse=mse(beta, inst.beta0), mcc=mcc(beta != 0, truth), wall_time_ms=1e3 * (time.perf_counter() - t0), seed=cfg.seed, extra={"alpha": tr.alpha}))
            b_L = fit_weighted_lasso(ds, None, lam_L / n).beta
            w = update_weights(b_L, _structure_spec(inst, cfg.structure), cfg.gamma)
            beta = None
            for tr in sa_tr:
                t0 = time.perf_counter()
                beta = fit_weighted_lasso(ds, w, tr.implied_lambda / n, warm_start=beta).beta
                out.append(MetricsRow("salasso", r, delta, tr.implied_lambda / n, cfg.gamma, mse=mse(beta, inst.beta0), mcc=mcc(beta != 0, truth), wall_time_ms=1e3 * (time.perf_counter() - t0), seed=cfg.seed, extra={"alpha": tr.alpha}))
            return out

        for block in _pmap(one, range(cfg.replications), cfg.threads):
            rows.extend(block)
    return rows


def _cv_methods(inst, structure, cfg, solver):
    """CV-tuned lasso, adaptive lasso and SA-lasso at each requested T."""
    ds = LinearDataset(inst.y, inst.X)
    truth = inst.beta0 != 0
    spec = _structure_spec(inst, structure)
    gammas = cfg.gamma_grid or None
    T_max = max(cfg.T)
    out = []
    t0 = time.perf_counter()
    cv = cross_validate(ds, spec, None, gammas, cfg.folds, T_max, solver, n_lambda=cfg.n_lambda, lambda_ratio=cfg.lambda_ratio)
    dt = 1e3 * (time.perf_counter() - t0)
    tr = cv.trajectory
    b = tr[0].beta
    out.append(("lasso", b, cv.lambdas[0], np.nan, dt))
    for T in sorted(set(cfg.T)):
        rec = tr[T]
        out.append((f"salasso_T{T}", rec.beta, rec.lam, rec.gamma, dt))
    return [(name, b, lam, g, dt, mse(b, inst.beta0), mcc(b != 0, truth)) for name, b, lam, g, dt in out]


def run_t_robustness(cfg: ExperimentConfig) -> List[MetricsRow]:
    """SA-lasso with CV at every iteration; records the T-prefixes of one long run."""
    rec, _ = resolve_preset(cfg.structure, cfg.preset, cfg.p)
    rows = []
    for delta in cfg.delta:
        n = round(delta * cfg.p)

        def one(r):
            inst = simulate(cfg.structure, n, cfg.p, cfg.sigma2, cfg.seed, r, design=cfg.design, recipe=rec)
            solver = SolverConfig(seed=cfg.seed + r)
            return [
                MetricsRow(name, r, delta, lam, g, mse=m, mcc=c, wall_time_ms=dt, seed=cfg.seed)
                for name, b, lam, g, dt, m, c in _cv_methods(inst, cfg.structure, cfg, solver)
            ]

        for block in _pmap(one, range(cfg.replications), cfg.threads):
            rows.extend(block)
    return rows


def run_sweep(cfg: ExperimentConfig) -> List[MetricsRow]:
    """Method comparison across delta: CV lasso, adaptive lasso (no structure) and SA-lasso."""
    rec, _ = resolve_preset(cfg.structure, cfg.preset, cfg.p)
    rows = []
    for delta in cfg.delta:
        n = round(delta * cfg.p)

        def one(r):
            inst = simulate(cfg.structure, n, cfg.p, cfg.sigma2, cfg.seed, r, design=cfg.design, recipe=rec)
            solver = SolverConfig(seed=cfg.seed + r)
            ds = LinearDataset(inst.y, inst.X)
            truth = inst.beta0 != 0
            out = [
                MetricsRow(name, r, delta, lam, g, mse=m, mcc=c, wall_time_ms=dt, seed=cfg.seed)
                for name, b, lam, g, dt, m, c in _cv_methods(inst, cfg.structure, cfg, solver)
            ]
            t0 = time.perf_counter()
            cv = cross_validate(ds, None, None, cfg.gamma_grid or None, cfg.folds, 1, solver, n_lambda=cfg.n_lambda, lambda_ratio=cfg.lambda_ratio)
            b = cv.trajectory.beta
            out.append(MetricsRow("alasso", r, delta, cv.lambdas[1], cv.gammas[1], mse=mse(b, inst.beta0), mcc=mcc(b != 0, truth), wall_time_ms=1e3 * (time.perf_counter() - t0), seed=cfg.seed))
            return out

        for block in _pmap(one, range(cfg.replications), cfg.threads):
            rows.extend(block)
    return rows


RUNNERS = {
    "se_sweep": run_se_sweep,
    "amp_vs_solver": run_amp_vs_solver,
    "fig1": run_fig1,
    "t_robustness": run_t_robustness,
    "sweep": run_sweep,
}


def run_experiment(cfg: ExperimentConfig) -> Tuple[Path, Path]:
    """Run ``cfg.kind`` and write ``<out>.csv`` and ``<out>.json``."""
    rows = RUNNERS[cfg.kind](cfg)
    out = Path(cfg.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    csv_path = out.with_suffix(".csv")
    json_path = out.with_suffix(".json")
    write_metrics_csv(csv_path, rows)
    group_keys = ("method", "delta", "alpha") if cfg.kind in ("se_sweep", "fig1", "amp_vs_solver") else ("method", "delta")
    summary = summarize(rows, group_keys)
    write_summary_json(json_path, summary, config=dataclasses.asdict(cfg))
    return csv_path, json_path
