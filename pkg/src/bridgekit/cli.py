"""Command-line entry point: ``bridgekit {fit,select,simulate,pollution}``.

Exit status is 0 on success, 1 on a usage error and 2 when the data or the
computation fails. Output files are written only after everything has been
computed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import METHODS
from .criteria import CRITERIA, DETERMINISTIC, SCALAR_CRITERIA, criterion_kind, eic
from .data import default_pollution_path, load_any_csv, load_pollution, standardize
from .estimator import FitConfig, fit_bridge
from .exceptions import BridgeKitError
from .experiments import pollution_split_errors, run_monte_carlo, run_pollution
from .penalty import Hyperparams
from .selection import (
    Grid,
    default_pollution_grid,
    default_simulation_grid,
    fmt17,
    select,
    table_records,
    TABLE_HEADER,
)

THREADS_ENV = "BRIDGEKIT_THREADS"
GRID_PRESETS = {"simulation": default_simulation_grid, "pollution": default_pollution_grid}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _float_list(text: str, flag: str) -> list:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{flag}: expected a comma-separated list of numbers, got {text!r}") from None
    if not values:
        raise UsageError(f"{flag}: empty list")
    return values


def _criteria_list(text: str, flag: str) -> list:
    out = []
    for name in text.split(","):
        try:
            out.append(criterion_kind(name))
        except ValueError:
            raise UsageError(f"{flag}: unknown criterion {name.strip()!r}; valid names: "
                             f"{', '.join(c.lower() for c in CRITERIA)}") from None
    return out


def _baseline_list(text: str) -> list:
    if text.strip().lower() in ("", "none"):
        return []
    lookup = {m.lower(): m for m in METHODS}
    out = []
    for name in text.split(","):
        key = name.strip().lower()
        if key not in lookup:
            raise UsageError(f"--baselines: unknown method {name.strip()!r}; valid: "
                             f"{', '.join(m.lower() for m in METHODS)}")
        out.append(lookup[key])
    return out


def _grid_from_args(args) -> Grid:
    preset = args.grid
    if preset not in GRID_PRESETS:
        raise UsageError(f"--grid: unknown preset {preset!r}; valid: {', '.join(GRID_PRESETS)}")
    base = GRID_PRESETS[preset]()
    lambdas = base.lambdas
    qs = base.qs
    if args.lambdas:
        lambdas = sorted(_float_list(args.lambdas, "--lambdas"), reverse=True)
    if args.qs:
        qs = _float_list(args.qs, "--qs")
    try:
        return Grid(tuple(lambdas), tuple(qs))
    except ValueError as exc:
        raise UsageError(f"--lambdas/--qs: {exc}") from None


def _threads(args) -> int:
    if args.threads is not None:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fit_config(args) -> FitConfig:
    return FitConfig(delta=args.delta, max_iters=args.max_iters)


# --------------------------------------------------------------------------
# commands


def cmd_fit(args, out):
    if args.lam is None or args.q is None:
        raise UsageError("fit requires --lambda and --q")
    if args.lam <= 0 or args.q <= 0:
        raise UsageError("--lambda and --q must be positive")
    raw = load_any_csv(args.input)
    data, params = standardize(raw)
    hp = Hyperparams(args.lam, args.q)
    fit = fit_bridge(data, hp, _fit_config(args))
    scores = {k: SCALAR_CRITERIA[k](fit, data, hp) for k in DETERMINISTIC}
    if args.eic_b > 0:
        scores["EIC"] = eic(fit, data, hp, B=args.eic_b, seed=args.seed, cfg=_fit_config(args))
    payload = {
        "lambda": hp.lam,
        "q": hp.q,
        "beta": [float(b) for b in fit.beta_hat],
        "beta_raw_scale": [float(b) for b in fit.beta_hat / params.x_scales],
        "intercept_raw_scale": float(params.y_mean - np.sum(params.x_means * fit.beta_hat / params.x_scales)),
        "sigma2": fit.sigma2_hat,
        "active_set": [j + 1 for j in fit.active_set],
        "iterations": fit.iterations,
        "converged": fit.converged,
        "criteria": {k: {"value": v.value, "valid": v.valid} for k, v in scores.items()},
    }
    if args.format == "json":
        text = json.dumps(_json17(payload), indent=1) + "\n"
    else:
        rows = [("field", "value")]
        rows += [(f"beta{j + 1}", fmt17(b)) for j, b in enumerate(fit.beta_hat)]
        rows += [("sigma2", fmt17(fit.sigma2_hat)), ("iterations", str(fit.iterations)),
                 ("converged", fmt17(fit.converged))]
        rows += [(k, fmt17(v.value) if v.valid else "invalid") for k, v in scores.items()]
        text = "".join(",".join(r) + "\n" for r in rows)
    _emit(args, text, out)
    return 0


def cmd_select(args, out):
    kind = _criteria_list(args.criterion, "--criterion")
    if len(kind) != 1:
        raise UsageError("--criterion takes exactly one name")
    grid = _grid_from_args(args)
    raw = load_any_csv(args.input)
    data, _ = standardize(raw)
    res = select(data, grid, kind[0], _fit_config(args), seed=args.seed, eic_B=args.eic_b,
                 warm_start=args.warm_start)
    best = {"lambda": res.best.lam, "q": res.best.q, "criterion": res.best_score.kind,
            "value": res.best_score.value, "active_set": [j + 1 for j in res.best_fit.active_set]}
    if args.format == "json":
        table = [dict(zip(TABLE_HEADER, rec)) for rec in table_records(res)]
        text = json.dumps(_json17({"best": best, "table": table}), indent=1) + "\n"
    else:
        lines = [",".join(TABLE_HEADER)]
        lines += [",".join(fmt17(v) for v in rec) for rec in table_records(res)]
        text = "\n".join(lines) + "\n"
    summary = (f"best: lambda={res.best.lam:.4g} q={res.best.q:.4g} "
               f"{res.best_score.kind}={res.best_score.value:.4g} "
               f"active={' '.join(str(j + 1) for j in res.best_fit.active_set) or '-'}\n")
    if args.out:
        _atomic_write(args.out, text)
        out.write(summary)
    else:
        out.write(text)
        if args.format == "csv":
            out.write("# " + summary)
    return 0


def cmd_simulate(args, out):
    if args.setting is None:
        raise UsageError("simulate requires --setting")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    criteria = _criteria_list(args.criteria, "--criteria")
    baselines = _baseline_list(args.baselines)
    grid = _grid_from_args(args)
    threads = _threads(args)
    report = run_monte_carlo(
        args.setting, args.trials, criteria, baselines, seed=args.seed, grid=grid,
        cfg=_fit_config(args), eic_B=args.eic_b, threads=threads, warm_start=args.warm_start,
    )
    if args.out:
        out_path = Path(args.out)
        trials_path = Path(args.trials_out) if args.trials_out else out_path.with_name(
            f"trials{report.setting}{'.json' if args.format == 'json' else '.csv'}")
        if args.format == "json":
            _atomic_write(out_path, report.to_json() + "\n")
        else:
            _atomic_write(out_path, report.table_csv())
            _atomic_write(trials_path, report.trials_csv())
    out.write(report.human_table() + "\n")
    if report.failures:
        out.write(f"{len(report.failures)} trial(s) failed and were excluded\n")
    return 0


def cmd_pollution(args, out):
    path = args.input or default_pollution_path()
    if path is None:
        raise BridgeKitError(
            "no pollution CSV given: pass --input or set BRIDGEKIT_POLLUTION_CSV (see README)")
    data = load_pollution(path)
    grid = _grid_from_args(args)
    cfg = _fit_config(args)
    if args.splits > 1:
        rows = []
        for s in range(args.split_seed, args.split_seed + args.splits):
            errors, _, _ = pollution_split_errors(data, s, grid, cfg)
            rows.append((s, errors))
        methods = list(rows[0][1])
        med = {m: float(np.median([e[m] for _, e in rows])) for m in methods}
        if args.format == "json":
            text = json.dumps(_json17({"splits": [{"split_seed": s, **e} for s, e in rows],
                                       "median": med}), indent=1) + "\n"
        else:
            text = "split_seed," + ",".join(methods) + "\n"
            text += "".join(f"{s}," + ",".join(fmt17(e[m]) for m in methods) + "\n" for s, e in rows)
            text += "median," + ",".join(fmt17(med[m]) for m in methods) + "\n"
    else:
        report = run_pollution(data, args.split_seed, grid, cfg)
        text = report.to_json() + "\n" if args.format == "json" else report.table_csv()
    _emit(args, text, out)
    return 0


def _emit(args, text, out):
    if args.out:
        _atomic_write(args.out, text)
    else:
        out.write(text)


def _json17(obj):
    """Round floats through 17 significant digits (JSON mirror of the CSV)."""
    if isinstance(obj, dict):
        return {k: _json17(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json17(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if v != v else float(f"{v:.17g}")
    return obj


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bridgekit", description="Bridge regression with GBIC tuning.")
    parser.add_argument("--version", action="version", version=f"bridgekit {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, grid_default="simulation"):
        p.add_argument("--seed", type=int, default=0, help="seed for every random draw")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--out", help="output file (default: standard output)")
        p.add_argument("--eic-b", type=int, default=100, dest="eic_b", help="EIC bootstrap replicates")
        p.add_argument("--delta", type=float, default=1e-5, help="LQA convergence tolerance")
        p.add_argument("--max-iters", type=int, default=500, dest="max_iters")
        p.add_argument("--grid", default=grid_default, help="grid preset: simulation or pollution")
        p.add_argument("--lambdas", help="explicit comma-separated lambda list (overrides the preset)")
        p.add_argument("--qs", help="explicit comma-separated q list (overrides the preset)")
        p.add_argument("--warm-start", action="store_true", dest="warm_start")
        p.add_argument("--threads", type=int, default=None)

    p = sub.add_parser("fit", help="fit one (lambda, q) point")
    p.add_argument("--input", required=True)
    p.add_argument("--lambda", type=float, dest="lam")
    p.add_argument("--q", type=float)
    common(p)
    p.set_defaults(func=cmd_fit, eic_b=0)

    p = sub.add_parser("select", help="grid search under one criterion")
    p.add_argument("--input", required=True)
    p.add_argument("--criterion", default="gbic")
    common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("simulate", help="Monte Carlo study for one setting")
    p.add_argument("--setting", type=int, choices=range(1, 6))
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--criteria", default=",".join(c.lower() for c in CRITERIA))
    p.add_argument("--baselines", default="none", help="comma list of ols,ridge,lasso,enet or none")
    p.add_argument("--trials-out", dest="trials_out")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pollution", help="pollution-data experiment")
    p.add_argument("--input")
    p.add_argument("--split-seed", type=int, default=0, dest="split_seed")
    p.add_argument("--splits", type=int, default=1)
    common(p, grid_default="pollution")
    p.set_defaults(func=cmd_pollution)
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required: fit, select, simulate or pollution")
        return args.func(args, out)
    except UsageError as exc:
        err.write(f"bridgekit: usage error: {exc}\n")
        return 1
    except (BridgeKitError, np.linalg.LinAlgError, ValueError) as exc:
        err.write(f"bridgekit: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
