"""Command-line front end.

Exit codes: 0 on success, 1 on a usage error, 2 when a computation fails.
Every subcommand accepts ``--config FILE`` (flat ``key = value`` lines whose
keys match the long flag names) and ``--dump-config``; explicit flags
override file values.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import KINDS, ConfigError, ExperimentConfig, parse_config_text, run_experiment
from .model import LinearDataset, SolverConfig, StructureSpec

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text):
    try:
        return tuple(float(x) for x in str(text).replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}") from None


def _ints(text):
    try:
        return tuple(int(x) for x in str(text).replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of integers, got {text!r}") from None


def _common(sp):
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None, help="output path or prefix")
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--config", default=None, help="key = value file; flags override it")
    sp.add_argument("--dump-config", action="store_true", help="print the effective settings and exit")


def _data_args(sp):
    sp.add_argument("--data", required=True, help="regression CSV (y,x_0001,...)")
    sp.add_argument("--structure-file", default=None, help="feature_id,group_id or feature_id,u_1.. CSV")
    sp.add_argument("--standardize", action="store_true", help="centre and unit-norm the columns")


def _experiment_args(sp, kind_default):
    d = ExperimentConfig()
    sp.add_argument("--kind", choices=KINDS, default=kind_default)
    sp.add_argument("--design", default=d.design)
    sp.add_argument("--structure", default=d.structure, choices=("group", "covariate", "null"))
    sp.add_argument("--preset", default=d.preset)
    sp.add_argument("--p", type=int, default=d.p)
    sp.add_argument("--delta", type=_floats, default=d.delta)
    sp.add_argument("--sigma2", type=float, default=d.sigma2)
    sp.add_argument("--alphas", type=_floats, default=d.alphas)
    sp.add_argument("--n-points", type=int, default=d.n_points)
    sp.add_argument("--gamma", type=float, default=d.gamma)
    sp.add_argument("--gamma-grid", type=_floats, default=d.gamma_grid)
    sp.add_argument("--n-lambda", type=int, default=d.n_lambda)
    sp.add_argument("--lambda-ratio", type=float, default=d.lambda_ratio)
    sp.add_argument("--folds", type=int, default=d.folds)
    sp.add_argument("--T", type=_ints, default=d.T)
    sp.add_argument("--replications", type=int, default=d.replications)
    sp.add_argument("--n-mc", type=int, default=d.n_mc)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="salasso", description="Structure adaptive lasso: fitting, AMP, state evolution and simulation studies.")
    ap.add_argument("--version", action="version", version=f"salasso {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    sp = sub.add_parser("simulate", help="generate a synthetic instance as CSV files")
    _common(sp)
    sp.add_argument("--structure", default="group", choices=("group", "covariate"))
    sp.add_argument("--preset", default="default")
    sp.add_argument("--design", default="iid")
    sp.add_argument("--p", type=int, default=500)
    sp.add_argument("--delta", type=float, default=0.64)
    sp.add_argument("--sigma2", type=float, default=0.2)

    sp = sub.add_parser("fit", help="SA-lasso at a fixed lambda and gamma")
    _common(sp)
    _data_args(sp)
    sp.add_argument("--lam", type=float, required=True)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--T", type=int, default=1)
    sp.add_argument("--tol", type=float, default=1e-7)

    sp = sub.add_parser("cv", help="SA-lasso with lambda and gamma chosen by K-fold cross-validation")
    _common(sp)
    _data_args(sp)
    sp.add_argument("--folds", type=int, default=10)
    sp.add_argument("--T", type=int, default=1)
    sp.add_argument("--gamma-grid", type=_floats, default=())
    sp.add_argument("--n-lambda", type=int, default=50)
    sp.add_argument("--lambda-ratio", type=float, default=1e-3)
    sp.add_argument("--refine-gamma", action="store_true")

    sp = sub.add_parser("amp", help="run lasso AMP at a threshold multiplier alpha")
    _common(sp)
    _data_args(sp)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--max-iter", type=int, default=500)

    sp = sub.add_parser("se", help="state-evolution risk curves")
    _common(sp)
    _experiment_args(sp, "se_sweep")

    sp = sub.add_parser("sweep", help="simulation experiments written as metrics CSV plus JSON summary")
    _common(sp)
    _experiment_args(sp, "sweep")

    sp = sub.add_parser("locmodel", help="group location model: estimator risk against the bound")
    _common(sp)
    sp.add_argument("--sizes", type=_ints, default=(10_000,) * 4)
    sp.add_argument("--a", type=_floats, default=(3.0, 3.0, 3.0))
    sp.add_argument("--sigma", type=float, default=1.0)
    sp.add_argument("--tau-pilot", type=float, default=None)
    sp.add_argument("--reps", type=int, default=20)
    sp.add_argument("--mc", type=int, default=1000)
    return ap


def _subparser(ap, name):
    for action in ap._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def parse_args(argv):
    ap = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in COMMANDS), None)
    if known.config and command:
        sp = _subparser(ap, command)
        try:
            values = parse_config_text(Path(known.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        except ValueError as exc:
            raise UsageError(f"{known.config}: {exc}") from None
        dests = {a.dest: a for a in sp._actions}
        defaults = {}
        for key, raw in values.items():
            dest = key.replace("-", "_")
            if dest not in dests or dest in ("config", "help", "dump_config"):
                raise UsageError(f"{known.config}: unknown key {key!r} for '{command}'")
            act = dests[dest]
            try:
                if isinstance(act.default, bool):
                    defaults[dest] = raw.lower() in ("1", "true", "yes", "on")
                else:
                    defaults[dest] = act.type(raw) if act.type else raw
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"{known.config}: bad value for {key!r}: {exc}") from None
            act.required = False
        sp.set_defaults(**defaults)
    return ap.parse_args(argv)


def _dump(args) -> str:
    skip = {"command", "config", "dump_config"}
    lines = []
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        if isinstance(v, tuple):
            v = ", ".join(str(x) for x in v)
        lines.append(f"{k} = {'' if v is None else v}")
    return "\n".join(lines) + "\n"


def _out(args, default):
    return Path(args.out or default)


def _load(args):
    from .io import load_regression_csv

    ds, structure = load_regression_csv(args.data, args.structure_file, args.standardize)
    return ds, structure


def cmd_simulate(args):
    from .experiments import resolve_preset
    from .io import write_regression_csv, write_structure_csv
    from .sim import simulate

    rec, _ = resolve_preset(args.structure, args.preset, args.p)
    n = round(args.delta * args.p)
    inst = simulate(args.structure, n, args.p, args.sigma2, args.seed, design=args.design, recipe=rec)
    prefix = _out(args, "instance")
    write_regression_csv(f"{prefix}_data.csv", inst.X, inst.y)
    spec = StructureSpec.group(inst.partition, args.p) if args.structure == "group" else StructureSpec.covariate(inst.U)
    write_structure_csv(f"{prefix}_structure.csv", spec, args.p)
    from .io import write_coefficients_csv

    write_coefficients_csv(f"{prefix}_beta0.csv", inst.beta0)
    print(f"wrote {prefix}_data.csv, {prefix}_structure.csv, {prefix}_beta0.csv")


def _summary(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def cmd_fit(args):
    from .fit import fit_salasso
    from .io import write_coefficients_csv

    ds, structure = _load(args)
    t0 = time.perf_counter()
    traj = fit_salasso(ds, structure, args.T, args.lam, args.gamma, SolverConfig(tol=args.tol, seed=args.seed))
    ms = 1e3 * (time.perf_counter() - t0)
    out = _out(args, "fit")
    write_coefficients_csv(out.with_suffix(".csv"), traj.beta, traj.weights.w)
    _summary(out.with_suffix(".json"), {
        "lambda": args.lam, "gamma": args.gamma, "T": args.T, "nonzero": int(np.count_nonzero(traj.beta)),
        "objective": [r.objective for r in traj.records], "converged": all(r.converged for r in traj.records), "wall_time_ms": ms,
    })
    print(f"wrote {out.with_suffix('.csv')}")


def cmd_cv(args):
    from .fit import cross_validate
    from .io import write_coefficients_csv

    ds, structure = _load(args)
    t0 = time.perf_counter()
    cv = cross_validate(ds, structure, None, args.gamma_grid or None, args.folds, args.T, SolverConfig(seed=args.seed), threads=args.threads, refine_gamma=args.refine_gamma, n_lambda=args.n_lambda, lambda_ratio=args.lambda_ratio)
    ms = 1e3 * (time.perf_counter() - t0)
    out = _out(args, "cv")
    write_coefficients_csv(out.with_suffix(".csv"), cv.trajectory.beta, cv.trajectory.weights.w)
    _summary(out.with_suffix(".json"), {
        "folds": args.folds, "T": args.T, "lambda": [float(x) for x in cv.lambdas], "gamma": [float(x) for x in cv.gammas],
        "cv_error": [float(s.mean_error.min()) for s in cv.stages], "nonzero": int(np.count_nonzero(cv.trajectory.beta)), "wall_time_ms": ms,
    })
    print(f"wrote {out.with_suffix('.csv')}")


def cmd_amp(args):
    from .amp import amp_lasso
    from .io import write_coefficients_csv

    ds, _ = _load(args)
    res = amp_lasso(ds, args.alpha, max_iter=args.max_iter)
    out = _out(args, "amp")
    write_coefficients_csv(out.with_suffix(".csv"), res.beta)
    _summary(out.with_suffix(".json"), {
        "alpha": args.alpha, "tau_star": res.tau_star, "implied_lambda": res.implied_lambda, "solver_lambda": res.solver_lambda(),
        "n_iter": res.n_iter, "converged": bool(res.converged), "tau_hat": [float(t) for t in res.tau_hat],
    })
    print(f"wrote {out.with_suffix('.csv')}")


def cmd_experiment(args):
    keys = {f for f in ExperimentConfig.__dataclass_fields__}
    values = {k: v for k, v in vars(args).items() if k in keys and v is not None}
    values["out"] = str(_out(args, args.kind))
    cfg = ExperimentConfig(**values)
    csv_path, json_path = run_experiment(cfg)
    print(f"wrote {csv_path} and {json_path}")


def cmd_locmodel(args):
    from .location import risk_bound, theorem_condition, mc_risk

    sizes = np.asarray(args.sizes, int)
    a = np.asarray(args.a, float)
    cond = theorem_condition(sizes, a, args.sigma, mc=args.mc, seed=args.seed, tau_pilot=args.tau_pilot)
    payload = {"sizes": sizes.tolist(), "a": a.tolist(), "sigma": args.sigma, "condition_holds": bool(cond.holds),
               "condition_margin": cond.margin, "condition_margin_se": cond.margin_se}
    risks = mc_risk(sizes, a, args.sigma, args.reps, args.seed, args.tau_pilot)
    payload["mc_risk_mean"] = float(np.mean(risks))
    payload["mc_risk_se"] = float(np.std(risks, ddof=1) / np.sqrt(len(risks))) if len(risks) > 1 else None
    payload["bound"] = float(risk_bound(sizes, a, args.sigma, mc=args.mc, seed=args.seed, tau_pilot=args.tau_pilot)) if cond.holds else None
    out = _out(args, "locmodel").with_suffix(".json")
    _summary(out, payload)
    print(json.dumps(payload, indent=2))


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "cv": cmd_cv,
    "amp": cmd_amp,
    "se": cmd_experiment,
    "sweep": cmd_experiment,
    "locmodel": cmd_locmodel,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if args.dump_config:
        sys.stdout.write(_dump(args))
        return EXIT_OK
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
