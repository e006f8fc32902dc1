"""Command-line front end: ``solve``, ``sweep``, ``classify`` and ``validate``.

Exit codes: 0 success, 1 integration failure, 2 tolerance not met (or a
verification check failed), 3 no bracket found, 64 usage error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import (BracketNotFound, DomainError, IntegrationStalled, NumericalFailure,
                     ShootError)
from .integrate import IntegratorConfig
from .model import F, FP, FPP, Params, i1_residuals
from .shoot import ShootConfig, ShootResult, classify, solve
from .verify import VerifyConfig, run_verification

SCHEMA_VERSION = 1
PROFILE_COLUMNS = ("t", "f", "fp", "fpp", "i1_residual")
SUMMARY_FIELDS = ("schema_version", "lambda", "alpha", "beta", "gamma_star", "tail_gap",
                  "iterations", "worst_i1_residual", "status")

EXIT_OK, EXIT_FAILURE, EXIT_TOLERANCE, EXIT_BRACKET, EXIT_USAGE = 0, 1, 2, 3, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- serialization

def fmt_float(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def dump_json(obj, indent: int = 0) -> str:
    """JSON with every float written to 17 significant digits."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, str):
        import json
        return json.dumps(obj)
    if isinstance(obj, (bool, np.bool_, int, float, np.integer, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{dump_json(str(k))}: {dump_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) for v in obj):
            return "[" + ", ".join(fmt_float(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dump_json(v, indent + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _timestamp(args) -> dict:
    if getattr(args, "no_timestamp", False):
        return {}
    now = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0)
    return {"timestamp": now.isoformat()}


def profile_rows(result: ShootResult):
    y = result.profile.y
    r = i1_residuals(y, result.params, result.gamma_star)
    return np.column_stack([result.profile.t, y[:, F], y[:, FP], y[:, FPP], r])


def write_profile_csv(path, result: ShootResult):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(PROFILE_COLUMNS) + "\n")
        for row in profile_rows(result):
            fh.write(",".join(fmt_float(v) for v in row) + "\n")


def summary_record(params: Params, result, status: str) -> dict:
    nan = math.nan
    return {
        "schema_version": SCHEMA_VERSION,
        "lambda": params.lam,
        "alpha": params.alpha,
        "beta": params.beta,
        "gamma_star": result.gamma_star if result else nan,
        "tail_gap": result.tail_gap if result else nan,
        "iterations": result.iterations if result else 0,
        "worst_i1_residual": result.residual_report["max_i1"] if result else nan,
        "status": status,
    }


# ---------------------------------------------------------------- argument handling

def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def parse_grid(spec: str):
    """``a:b:n`` (arithmetic), ``geom:a:b:n`` (geometric) or a single value."""
    try:
        parts = spec.split(":")
        geometric = parts[0] == "geom"
        if geometric:
            parts = parts[1:]
        if len(parts) == 1 and not geometric:
            return [float(parts[0])]
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        if len(parts) != 3:
            raise ValueError
    except (ValueError, IndexError):
        raise UsageError(f"malformed grid {spec!r}; expected a:b:n or geom:a:b:n")
    if n <= 0:
        raise UsageError(f"grid {spec!r} is empty")
    if not (math.isfinite(a) and math.isfinite(b)):
        raise UsageError(f"grid {spec!r} has non-finite bounds")
    if geometric:
        if a <= 0 or b <= 0:
            raise UsageError(f"geometric grid {spec!r} needs positive bounds")
        return [float(v) for v in np.geomspace(a, b, n)]
    return [float(v) for v in np.linspace(a, b, n)]


def _add_numeric(p, with_params=True):
    if with_params:
        p.add_argument("--lambda", dest="lam", type=float, help="power-law exponent (> 0)")
        p.add_argument("--alpha", type=float, help="wall value f(0)")
        p.add_argument("--beta", type=float, help="wall slope f'(0) (> 0)")
    p.add_argument("--tmax", type=float, default=50.0, help="truncation horizon (default 50)")
    p.add_argument("--rtol", type=float, default=1e-10, help="relative tolerance (default 1e-10)")
    p.add_argument("--atol", type=float, default=1e-12, help="absolute tolerance (default 1e-12)")
    p.add_argument("--gamma-tol", type=float, default=1e-12,
                   help="bisection width on gamma (default 1e-12)")
    p.add_argument("--allow-lambda-zero", action="store_true",
                   help="admit lambda = 0 (Blasius validation)")
    p.add_argument("--config", help="flat key = value file of defaults; flags override")


def _add_output(p, default_format="csv"):
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.add_argument("--format", choices=("csv", "json"), default=default_format)
    p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp field")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mixedconv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("solve", help="solve one boundary-value problem")
    _add_numeric(p)
    _add_output(p)

    p = sub.add_parser("sweep", help="solve over a (lambda, beta) grid")
    p.add_argument("--lambda-grid", required=False, help="a:b:n or geom:a:b:n")
    p.add_argument("--beta-grid", required=False, help="a:b:n or geom:a:b:n")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: available CPUs)")
    _add_numeric(p, with_params=False)
    _add_output(p)

    p = sub.add_parser("classify", help="classify one initial curvature gamma")
    _add_numeric(p)
    p.add_argument("--gamma", type=float, help="initial curvature f''(0)")
    p.add_argument("--mode", choices=("convex", "concave", "auto"), default="auto")

    p = sub.add_parser("validate", help="solve, then run the verification suite")
    _add_numeric(p)
    p.add_argument("--grid", type=int, default=50, help="partition grid size (default 50)")
    p.add_argument("--workers", type=int, default=None)
    _add_output(p, default_format="json")
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        conf = read_config(args.config)
        conf = {("lam" if k == "lambda" else k): v for k, v in conf.items()}
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        unknown = set(conf) - set(known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        defaults = {}
        for k, v in conf.items():
            act = known[k]
            if act.type is not None:
                defaults[k] = act.type(v)
            elif isinstance(act, argparse._StoreTrueAction):
                defaults[k] = v.lower() in ("1", "true", "yes", "on")
            else:
                defaults[k] = v
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _params(args) -> Params:
    missing = [n for n, d in (("--lambda", "lam"), ("--alpha", "alpha"), ("--beta", "beta"))
               if getattr(args, d, None) is None]
    if missing:
        raise UsageError(f"missing required flags: {' '.join(missing)}")
    return Params(args.lam, args.alpha, args.beta, args.allow_lambda_zero)


def _shoot_cfg(args) -> ShootConfig:
    icfg = IntegratorConfig(rtol=args.rtol, atol=args.atol, t_max=args.tmax)
    return ShootConfig(integrator=icfg, gamma_atol=args.gamma_tol)


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _run_solve(params, scfg):
    """(result or None, status, exit code)."""
    try:
        return solve(params, scfg), "converged", EXIT_OK
    except BracketNotFound as e:
        print(f"error: {e}", file=sys.stderr)
        return e.result, e.status, EXIT_BRACKET
    except ShootError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.result, e.status, EXIT_TOLERANCE


# ---------------------------------------------------------------- commands

def cmd_solve(args) -> int:
    params = _params(args)
    result, status, code = _run_solve(params, _shoot_cfg(args))
    summary = summary_record(params, result, status) | _timestamp(args)
    if args.format == "json":
        doc = dict(summary)
        if result is not None:
            rows = profile_rows(result)
            doc["profile"] = {c: rows[:, i] for i, c in enumerate(PROFILE_COLUMNS)}
        _emit(dump_json(doc) + "\n", args.out)
    else:
        if args.out and result is not None:
            write_profile_csv(args.out, result)
            Path(args.out).with_suffix(".summary.json").write_text(dump_json(summary) + "\n")
        elif args.out:
            Path(args.out).with_suffix(".summary.json").write_text(dump_json(summary) + "\n")
        if not args.out:
            sys.stdout.write(dump_json(summary) + "\n")
    return code


@dataclass
class SweepRecord:
    lam: float
    alpha: float
    beta: float
    gamma_star: float
    tail_gap: float
    iterations: int
    worst_i1_residual: float
    status: str


SWEEP_COLUMNS = ("lambda", "alpha", "beta", "gamma_star", "tail_gap", "iterations",
                 "worst_i1_residual", "status")


def _sweep_row(job) -> SweepRecord:
    lam, alpha, beta, allow0, scfg = job
    params = Params(lam, alpha, beta, allow0)
    try:
        result, status = solve(params, scfg), "converged"
    except ShootError as e:
        result, status = e.result, e.status
    except (NumericalFailure, IntegrationStalled):
        result, status = None, "undetermined"
    s = summary_record(params, result, status)
    return SweepRecord(params.lam, params.alpha, params.beta, s["gamma_star"], s["tail_gap"],
                       s["iterations"], s["worst_i1_residual"], status)


def cmd_sweep(args) -> int:
    if not args.lambda_grid or not args.beta_grid:
        raise UsageError("sweep needs --lambda-grid and --beta-grid")
    lams, betas = parse_grid(args.lambda_grid), parse_grid(args.beta_grid)
    scfg = _shoot_cfg(args)
    jobs = []
    for lam in lams:
        for beta in betas:
            Params(lam, args.alpha, beta, args.allow_lambda_zero)  # validate up front
            jobs.append((lam, args.alpha, beta, args.allow_lambda_zero, scfg))
    workers = args.workers or os.cpu_count() or 1
    if workers <= 1:
        records = [_sweep_row(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            records = list(ex.map(_sweep_row, jobs))

    if args.format == "json":
        doc = {"schema_version": SCHEMA_VERSION} | _timestamp(args)
        doc["records"] = [dict(zip(SWEEP_COLUMNS, (getattr(r, f.name) for f in fields(r))))
                          for r in records]
        text = dump_json(doc) + "\n"
    else:
        lines = [",".join(SWEEP_COLUMNS)]
        for r in records:
            vals = [getattr(r, f.name) for f in fields(r)]
            lines.append(",".join(v if isinstance(v, str) else fmt_float(v) for v in vals))
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return EXIT_OK if all(r.status == "converged" for r in records) else EXIT_TOLERANCE


def cmd_classify(args) -> int:
    params = _params(args)
    if args.gamma is None:
        raise UsageError("missing required flag: --gamma")
    mode = None if args.mode == "auto" else args.mode
    cfg = _shoot_cfg(args)
    try:
        c = classify(params, args.gamma, mode, cfg)
    except (NumericalFailure, IntegrationStalled) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    w = c.witness
    doc = {"tag": c.tag.value, "t_event": c.t_event,
           "witness": {"t": w.t, "f": w.f, "fp": w.fp, "fpp": w.fpp},
           "detail": c.detail}
    sys.stdout.write(dump_json(doc) + "\n")
    return EXIT_OK


def cmd_validate(args) -> int:
    params = _params(args)
    scfg = _shoot_cfg(args)
    result, status, code = _run_solve(params, scfg)
    if result is None:
        return code
    vcfg = VerifyConfig(n_grid=args.grid, workers=args.workers, shoot=scfg)
    report = run_verification(result, vcfg)
    doc = {"schema_version": SCHEMA_VERSION} | _timestamp(args)
    doc["solve_status"] = status
    doc.update(report.to_dict())
    _emit(dump_json(doc) + "\n", args.out)
    if code != EXIT_OK:
        return code
    return EXIT_OK if report.ok else EXIT_TOLERANCE


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "classify": cmd_classify,
            "validate": cmd_validate}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except (UsageError, DomainError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, IntegrationStalled) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
