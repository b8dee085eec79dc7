"""Command-line interface: ``epps-pulley <command> [options]``.

Exit codes: 0 ok, 1 verification failure, 2 usage error, 3 numeric failure.
Every output carries a run manifest (CSV: ``#`` header lines; JSON: a
``manifest`` object).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from datetime import datetime, timezone

from . import __version__
from .cumulants import compare_methods, cumulants_closed, cumulants_from_spectrum, cumulants_from_traces
from .errors import ConsistencyError, ContractViolation, DomainError, SolverFailure
from .kernels import as_beta
from .mercer import DEFAULT_TRUNCATION
from .montecarlo import SimConfig, critical_values, worker_count
from .pearson import pearson_fit, pearson_quantile
from .quadrature import DEFAULT_NYSTROM_ORDER, gauss_hermite_rule
from .spectrum import DEFAULT_SCAN, find_spectrum, nystrom_spectrum

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

# keys accepted in a --config file and their types
CONFIG_KEYS = {"J": int, "nystrom_order": int, "scan": int, "reps": int, "seed": int, "digits": int}
DEFAULTS = {
    "J": DEFAULT_TRUNCATION,
    "nystrom_order": DEFAULT_NYSTROM_ORDER,
    "scan": DEFAULT_SCAN,
    "reps": 100_000,
    "seed": 20240101,
    "digits": 6,
}


class UsageError(Exception):
    pass


def read_config(path) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](value)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return out


def _settings(args) -> dict:
    """Defaults, overridden by the config file, overridden by flags."""
    s = dict(DEFAULTS)
    if args.config:
        s.update(read_config(args.config))
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            s[key] = v
    if not 1 <= s["digits"] <= 15:
        raise UsageError(f"--digits must be in 1..15, got {s['digits']}")
    return s


def _beta(text):
    try:
        return as_beta(float(text)).value
    except (ValueError, ContractViolation):
        raise argparse.ArgumentTypeError(f"beta must be a finite number > 0, got {text!r}") from None


def _alpha(text):
    try:
        a = float(text)
    except ValueError:
        a = math.nan
    if not 0.0 < a < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {text!r}")
    return a


def _nonneg_int(text):
    try:
        v = int(text)
    except ValueError:
        v = -1
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}")
    return v


def _manifest(command, params, settings, **extra) -> dict:
    m = {
        "command": command,
        "parameters": params,
        "seed": settings["seed"] if command == "critical-values" else None,
        "truncation_J": settings["J"],
        "quadrature_orders": {"nystrom": settings["nystrom_order"]},
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    m.update(extra)
    return m


def _fmt(value, digits):
    if isinstance(value, float):
        if not math.isfinite(value):
            return str(value)
        return f"{value:.{digits - 1}E}"
    return value


def emit(manifest, columns, rows, fmt, digits, out=None):
    """Write ``rows`` (list of dicts) with the manifest as CSV or JSON."""
    out = out or sys.stdout
    rows = [{c: _fmt(r.get(c), digits) for c in columns} for r in rows]
    if fmt == "json":
        json.dump({"manifest": manifest, "columns": columns, "rows": rows}, out, indent=2)
        out.write("\n")
        return
    buf = io.StringIO()
    buf.write("# manifest: " + json.dumps(manifest, sort_keys=True) + "\n")
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    out.write(buf.getvalue())


# ---------------------------------------------------------------------------
# commands


def cmd_eigenvalues(args, s):
    if args.count == 0:
        rows, columns = [], ["index", "value", "parity", "residual"]
    else:
        spec = find_spectrum(args.beta, args.count, J=s["J"], scan=s["scan"])
        columns = ["index", "value", "parity", "residual"]
        rows = [
            {"index": i, "value": float(v), "parity": p, "residual": float(r)}
            for i, (v, p, r) in enumerate(zip(spec.eigenvalues, spec.parity, spec.residuals))
        ]
        if args.oracle == "nystrom":
            rule = gauss_hermite_rule(s["nystrom_order"], args.beta)
            ny = nystrom_spectrum(args.beta, rule, count=args.count)
            columns += ["nystrom", "rel_diff"]
            for row, v in zip(rows, ny):
                row["nystrom"] = float(v)
                row["rel_diff"] = abs(float(v) - row["value"]) / row["value"]
    params = {"beta": args.beta, "count": args.count, "oracle": args.oracle}
    emit(_manifest("eigenvalues", params, s), columns, rows, args.format, s["digits"])
    return EXIT_OK


def cmd_cumulants(args, s):
    sets = []
    if args.method in ("all", "closed_form"):
        sets.append(cumulants_closed(args.beta))
    if args.method in ("all", "spectrum_sum"):
        # power sums over the leading 20 eigenvalues
        sets.append(cumulants_from_spectrum(find_spectrum(args.beta, 20, J=s["J"], scan=s["scan"])))
    if args.method in ("all", "trace_quadrature"):
        sets.append(cumulants_from_traces(args.beta, gauss_hermite_rule(s["nystrom_order"], args.beta)))
    rows = compare_methods(*sets)
    columns = ["m"] + [cs.method for cs in sets] + ["discrepancy"]
    notes = {cs.method: cs.truncation_note for cs in sets if cs.truncation_note is not None}
    params = {"beta": args.beta, "method": args.method}
    emit(_manifest("cumulants", params, s, truncation_tail=notes), columns, rows, args.format, s["digits"])
    return EXIT_OK


def cmd_critical_values(args, s):
    alphas = sorted(set(args.alpha or [0.1, 0.05, 0.01]), reverse=True)
    params = {"beta": args.beta, "alphas": alphas}
    if args.asymptotic:
        cs = cumulants_from_traces(args.beta, gauss_hermite_rule(s["nystrom_order"], args.beta))
        fit = pearson_fit(cs)
        rows = [{"alpha": a, "critical_value": pearson_quantile(fit, 1.0 - a)} for a in alphas]
        params["n"] = "asymptotic"
        extra = {"pearson_type": fit.pearson_type, "seed": None}
    else:
        cfg = SimConfig(args.n, args.beta, s["reps"], s["seed"], tuple(alphas))
        cv = critical_values(cfg)
        rows = [{"alpha": a, "critical_value": cv[a]} for a in cfg.alphas]
        params.update(n=args.n, reps=s["reps"])
        extra = {"workers": worker_count()}
    emit(_manifest("critical-values", params, s, **extra), ["alpha", "critical_value"], rows, args.format,
         s["digits"])
    return EXIT_OK


def cmd_verify(args, s):
    from .verify import run_checks

    grid = args.beta if args.beta is not None else [0.5, 1.0, 2.0, 3.0]
    if not grid:
        raise UsageError("empty beta grid")
    checks = [c for b in grid for c in run_checks(b)]
    rows = [
        {"beta": c.beta, "check": c.name, "status": c.status, "value": c.value, "tolerance": c.tolerance,
         "detail": c.detail}
        for c in checks
    ]
    failed = [c for c in checks if not c.passed]
    warned = [c for c in checks if c.warning]
    overall = "FAIL" if failed else ("PASS-with-warnings" if warned else "PASS")
    emit(_manifest("verify", {"grid": grid}, s, result=overall),
         ["beta", "check", "status", "value", "tolerance", "detail"], rows, args.format, s["digits"])
    print(f"verify: {overall} ({len(checks) - len(failed)}/{len(checks)} checks passed)", file=sys.stderr)
    return EXIT_VERIFY if failed else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--digits", type=int, help="significant digits, 1..15 (default 6)")
    common.add_argument("--config", help="key=value file for J, nystrom_order, scan, reps, seed, digits")
    common.add_argument("--J", type=int, help="Mercer truncation (default 150)")
    common.add_argument("--nystrom-order", dest="nystrom_order", type=int, help="quadrature order (default 300)")
    common.add_argument("--scan", type=int, help="probe points per pole gap (default 64)")

    p = argparse.ArgumentParser(prog="epps-pulley", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eigenvalues", parents=[common], help="leading eigenvalues of the covariance operator")
    e.add_argument("--beta", type=_beta, required=True)
    e.add_argument("--count", type=_nonneg_int, default=10)
    e.add_argument("--oracle", choices=("none", "nystrom"), default="none")
    e.set_defaults(func=cmd_eigenvalues)

    c = sub.add_parser("cumulants", parents=[common], help="cumulants of the limit distribution")
    c.add_argument("--beta", type=_beta, required=True)
    c.add_argument("--method", choices=("all", "closed_form", "spectrum_sum", "trace_quadrature"), default="all")
    c.set_defaults(func=cmd_cumulants)

    v = sub.add_parser("critical-values", parents=[common], help="asymptotic or simulated critical values")
    v.add_argument("--beta", type=_beta, required=True)
    v.add_argument("--alpha", type=_alpha, action="append", help="significance level; repeatable")
    mode = v.add_mutually_exclusive_group(required=True)
    mode.add_argument("--asymptotic", action="store_true", help="Pearson fit to the limit cumulants")
    mode.add_argument("--n", type=int, help="sample size for Monte Carlo")
    v.add_argument("--reps", type=int)
    v.add_argument("--seed", type=int)
    v.set_defaults(func=cmd_critical_values)

    r = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    r.add_argument("--beta", type=_beta, nargs="*", help="beta grid (default 0.5 1 2 3)")
    r.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        settings = _settings(args)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args, settings)
    except (UsageError, ContractViolation) as exc:
        print(f"epps-pulley: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverFailure, ConsistencyError, DomainError, ArithmeticError) as exc:
        print(f"epps-pulley: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
