"""Command-line front end: comparison tables, PMF data, verification and sweeps."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import reference as ref
from .chain import (
    check_moment_bounds,
    generator_expectation_polynomial,
    generator_expectation_sine,
    scaled_moment,
    stationary_distribution,
)
from .density import ConditioningWarning, build_density
from .metrics import (
    CSV_COLUMNS,
    format_float,
    interval_pmf,
    kolmogorov_distance,
    moment_error_report,
    pmf_sup_error,
    rate_fit,
)
from .params import InvalidParameters, SystemParams, derive_params, state_to_x
from .quadrature import QuadratureError

EXIT_OK, EXIT_VERIFY, EXIT_ARGS, EXIT_NUMERIC = 0, 1, 2, 3
TOL_ENV = "ERLANG_DIFFUSION_TOL"

BENEFIT_GRID = tuple(ref.MEAN_BENEFIT)
KOLMOGOROV_GRID = tuple(ref.KOLMOGOROV) + ((100, 99.8),) + tuple(g for g in ref.RATE_GRID if g not in ref.KOLMOGOROV)


class ArgumentError(Exception):
    pass


def _tolerance(args) -> float | None:
    if args.tol is not None:
        return args.tol
    env = os.environ.get(TOL_ENV)
    if env:
        try:
            tol = float(env)
        except ValueError as exc:
            raise ArgumentError(f"{TOL_ENV} must be a number, got {env!r}") from exc
        if not tol > 0:
            raise ArgumentError(f"{TOL_ENV} must be positive")
        return tol
    return None


def _params(args, default_n=5, default_R=4.0):
    n = default_n if args.n is None else args.n
    if args.lam is not None and args.R is not None:
        raise ArgumentError("give either --R or --lambda, not both")
    try:
        if args.lam is not None:
            return derive_params(SystemParams(args.lam, args.mu, n))
        R = default_R if args.R is None else args.R
        return derive_params(SystemParams.from_load(n, R, args.mu))
    except InvalidParameters as exc:
        raise ArgumentError(str(exc)) from exc


def _parse_list(text: str | None, conv) -> list:
    if text is None:
        return []
    return [conv(t) for t in text.split(",") if t.strip()]


def _write(args, text: str):
    if args.out and args.out != "-":
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _reports(grid, tol, threads=1):
    """Comparison reports for each ``(n, R)``; order follows ``grid``."""

    def one(point):
        n, R = point
        try:
            return moment_error_report(derive_params(SystemParams.from_load(n, R)), tol=tol), None
        except (InvalidParameters, QuadratureError, FloatingPointError, ValueError) as exc:
            return None, f"{type(exc).__name__}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one, grid))
    return [one(p) for p in grid]


def _report_rows(results, grid):
    rows, errors = [], []
    for (n, R), (rep, err) in zip(grid, results):
        if rep is None:
            errors.append({"n": n, "R": R, "error": err})
        else:
            rows.append(rep)
    return rows, errors


def cmd_table_benefit(args) -> int:
    grid = BENEFIT_GRID
    rows, errors = _report_rows(_reports(grid, _tolerance(args), args.threads), grid)
    if errors:
        sys.stderr.write(_json(errors))
        return EXIT_NUMERIC
    if args.format == "json":
        _write(args, _json([{c: getattr(r, c) for c in CSV_COLUMNS} for r in rows]))
    else:
        _write(args, _csv([r.csv_row() for r in rows], CSV_COLUMNS))
    return EXIT_OK


def cmd_table_rates(args) -> int:
    grid = ref.RATE_GRID
    rows, errors = _report_rows(_reports(grid, _tolerance(args), args.threads), grid)
    if errors:
        sys.stderr.write(_json(errors))
        return EXIT_NUMERIC
    slopes = {
        "mean_y0": rate_fit([(r.R, r.mean_err_y0) for r in rows]),
        "mean_y": rate_fit([(r.R, r.mean_err_y) for r in rows]),
        "second_y0": rate_fit([(r.R, r.m2_err_y0) for r in rows]),
        "second_y": rate_fit([(r.R, r.m2_err_y) for r in rows]),
    }
    if args.format == "json":
        _write(args, _json({
            "rows": [dict({c: getattr(r, c) for c in CSV_COLUMNS}, EX2_scaled=r.EX2_scaled) for r in rows],
            "slopes": {k: {"slope": v.slope, "stderr": v.stderr} for k, v in slopes.items()},
        }))
    else:
        header = CSV_COLUMNS + ("EX2_scaled",)
        text = _csv([r.csv_row() + [format_float(r.EX2_scaled)] for r in rows], header)
        text += "\n" + _csv([[k, format_float(v.slope), format_float(v.stderr)] for k, v in slopes.items()],
                            ("quantity", "slope", "stderr"))
        _write(args, text)
    return EXIT_OK


def cmd_figure_pmf(args) -> int:
    d = _params(args)
    tol = _tolerance(args)
    dist = stationary_distribution(d)
    eta = build_density(d, "constant", tol=tol)
    nu = build_density(d, "state_dependent", tol=tol)
    K = dist.tail_cutoff(1e-12)
    k = np.arange(K + 1)
    x = state_to_x(k.astype(float), d)
    cols = (x, dist.pmf(k), interval_pmf(eta, K), interval_pmf(nu, K))
    header = ("k", "x", "pi", "pi_y0", "pi_y")
    if args.format == "json":
        _write(args, _json({h: list(v) for h, v in zip(header, (k,) + cols)}))
    else:
        rows = [[str(int(kk))] + [format_float(c[i]) for c in cols] for i, kk in enumerate(k)]
        _write(args, _csv(rows, header))
    return EXIT_OK


def cmd_table_kolmogorov(args) -> int:
    tol = _tolerance(args)
    grid = KOLMOGOROV_GRID

    def one(point):
        n, R = point
        d = derive_params(SystemParams.from_load(n, R))
        dist = stationary_distribution(d)
        r0 = kolmogorov_distance(dist, build_density(d, "constant", tol=tol))
        r1 = kolmogorov_distance(dist, build_density(d, "state_dependent", tol=tol))
        return n, R, r0, r1

    try:
        if args.threads > 1:
            with ThreadPoolExecutor(max_workers=args.threads) as ex:
                res = list(ex.map(one, grid))
        else:
            res = [one(p) for p in grid]
    except QuadratureError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    if args.format == "json":
        _write(args, _json({
            "rows": [{"n": n, "R": R, "dk_y0": a.value, "dk_y": b.value, "error_bar": max(a.error_bar, b.error_bar)}
                     for n, R, a, b in res],
            "notes": ref.discrepancy_notes(),
        }))
    else:
        rows = [[str(n), format_float(R), format_float(a.value), format_float(b.value),
                 format_float(max(a.error_bar, b.error_bar))] for n, R, a, b in res]
        _write(args, _csv(rows, ("n", "R", "dk_y0", "dk_y", "error_bar")))
    return EXIT_OK


def run_verification(d, tol=None, grid_step=None) -> dict:
    """Run every applicable check at one parameter point."""
    from .stein import SHIPPED, solve_poisson

    checks = {}
    dist = stationary_distribution(d)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConditioningWarning)
        nu = build_density(d, "state_dependent", tol=tol)
        eta = build_density(d, "constant", tol=tol)
    notes = list(dict.fromkeys(str(w.message) for w in caught if issubclass(w.category, ConditioningWarning)))
    theorem = d.theorem_regime

    bounds = check_moment_bounds(dist)
    for c in bounds.checks:
        checks[f"moment_bound:{c.name}"] = {"passed": c.passed, "skipped": c.skipped, "lhs": c.lhs, "rhs": c.rhs,
                                            "slack": c.slack}
    p = np.polynomial.Polynomial
    stat = {
        "x": generator_expectation_polynomial(dist, p([0, 1])),
        "x^2": generator_expectation_polynomial(dist, p([0, 0, 1])),
        "x^3": generator_expectation_polynomial(dist, p([0, 0, 0, 1])),
        "sin": generator_expectation_sine(dist),
    }
    # tolerances grow with the size of the terms that cancel, which matters near criticality
    degree = {"x": 1, "x^2": 2, "x^3": 3, "sin": 1}
    for k, v in stat.items():
        scale = max(1.0, d.lam * d.delta * (1.0 + scaled_moment(dist, degree[k] - 1, absolute=True)))
        checks[f"stationarity:{k}"] = {"passed": abs(v) < 1e-9 * scale, "skipped": False, "value": v,
                                       "scale": scale}
    step = None if grid_step is None else grid_step * d.delta
    for name, dens, bound in (("nu", nu, 4.0), ("eta", eta, math.sqrt(2.0 / math.pi))):
        sup = dens.sup_density(step)
        skip = name == "nu" and not theorem
        checks[f"density_bound:{name}"] = {"passed": skip or sup["sup"] <= bound, "skipped": skip, "sup": sup["sup"],
                                           "bound": bound}
        mass = float(np.sum(dens.region_masses))
        checks[f"normalization:{name}"] = {"passed": abs(mass - 1.0) < 1e-10, "skipped": False, "mass": mass}

    k_points = sorted({0, max(d.n - 2, 0), max(d.n - 1, 0), d.n, d.n + 3})
    for name, make in SHIPPED.items():
        key = f"stein:{name}"
        if not theorem:
            checks[key + ":poisson_residual"] = {"passed": True, "skipped": True}
            checks[key + ":generator_residual"] = {"passed": True, "skipped": True}
            continue
        sol = solve_poisson(make(), nu)
        xs = sol.default_grid(step)
        res = sol.poisson_residual(xs)
        worst = float(np.max(np.abs(res) / (1.0 + np.abs(xs))))
        checks[key + ":poisson_residual"] = {"passed": worst < 1e-7, "skipped": False, "max_scaled": worst,
                                             "points": int(xs.size)}
        ks = np.array(k_points)
        gres = np.abs(sol.generator_residual(ks))
        t = sol.generator_terms(ks)
        scale = np.maximum(1.0, np.abs(t["G_chain"]) + d.lam * d.delta * np.abs(sol.fprime(t["x"])))
        checks[key + ":generator_residual"] = {"passed": bool(np.all(gres < 1e-6 * d.mu * scale)),
                                               "skipped": False, "max": float(gres.max()),
                                               "max_scale": float(scale.max()), "states": k_points}
        checks[key + ":gradient_constants"] = {"passed": True, "skipped": False,
                                               **sol.empirical_gradient_constants(xs)}
    failed = [k for k, v in checks.items() if not v["passed"]]
    return {
        "n": d.n, "R": d.R, "mu": d.mu, "delta": d.delta, "zeta": d.zeta,
        "theorem_regime": theorem, "warnings": notes, "checks": checks,
        "failed": failed, "passed": not failed,
    }


def cmd_verify(args) -> int:
    d = _params(args)
    try:
        report = run_verification(d, tol=_tolerance(args), grid_step=args.grid_step)
    except QuadratureError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    for w in report["warnings"]:
        sys.stderr.write(f"warning: {w}\n")
    _write(args, _json(report))
    if not report["passed"]:
        sys.stderr.write("failed checks: " + ", ".join(report["failed"]) + "\n")
        return EXIT_VERIFY
    return EXIT_OK


def cmd_sweep(args) -> int:
    ns = _parse_list(args.n_list, int)
    Rs = _parse_list(args.R_list, float)
    grid = [(n, R) for n in ns for R in Rs]
    results = _reports(grid, _tolerance(args), args.threads)
    rows, errors = [], []
    for (n, R), (rep, err) in zip(grid, results):
        if rep is None:
            errors.append((n, R, err))
            rows.append([str(n), format_float(R)] + ["nan"] * (len(CSV_COLUMNS) - 2))
        else:
            rows.append(rep.csv_row())
    if args.format == "json":
        payload = [dict(zip(CSV_COLUMNS, r)) for r in rows]
        _write(args, _json({"rows": payload, "errors": [{"n": n, "R": R, "error": e} for n, R, e in errors]}))
    else:
        _write(args, _csv(rows, CSV_COLUMNS))
    for n, R, e in errors:
        sys.stderr.write(f"row n={n} R={R}: {e}\n")
    return EXIT_NUMERIC if errors else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mu", type=float, default=1.0, help="service rate (default 1)")
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--tol", type=float, default=None, help=f"quadrature tolerance (env {TOL_ENV})")
    common.add_argument("--grid-step", type=float, default=None,
                        help="refinement grid step in units of delta")
    common.add_argument("--threads", type=int, default=1)

    point = argparse.ArgumentParser(add_help=False)
    point.add_argument("--n", type=int, default=None, help="number of servers")
    point.add_argument("--R", type=float, default=None, help="offered load lambda/mu")
    point.add_argument("--lambda", dest="lam", type=float, default=None, help="arrival rate (instead of --R)")

    parser = argparse.ArgumentParser(prog="erlang-diffusion", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("table-benefit", parents=[common], help="mean errors for n=5 and n=100").set_defaults(
        func=cmd_table_benefit)
    sub.add_parser("table-rates", parents=[common], help="error rates on the R x10 grid").set_defaults(
        func=cmd_table_rates)
    sub.add_parser("figure-pmf", parents=[common, point], help="PMF and interval approximations").set_defaults(
        func=cmd_figure_pmf)
    sub.add_parser("table-kolmogorov", parents=[common], help="Kolmogorov distances").set_defaults(
        func=cmd_table_kolmogorov)
    sub.add_parser("verify", parents=[common, point], help="verification suite as JSON").set_defaults(
        func=cmd_verify)
    sw = sub.add_parser("sweep", parents=[common], help="comparison rows over an (n, R) grid")
    sw.add_argument("--n", dest="n_list", default=None, help="comma-separated server counts")
    sw.add_argument("--R", dest="R_list", default=None, help="comma-separated loads")
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ARGS if exc.code not in (0, None) else EXIT_OK
    if args.threads < 1:
        sys.stderr.write("--threads must be >= 1\n")
        return EXIT_ARGS
    if args.tol is not None and not args.tol > 0:
        sys.stderr.write("--tol must be positive\n")
        return EXIT_ARGS
    if args.grid_step is not None and not args.grid_step > 0:
        sys.stderr.write("--grid-step must be positive\n")
        return EXIT_ARGS
    try:
        return args.func(args)
    except ArgumentError as exc:
        sys.stderr.write(f"invalid arguments: {exc}\n")
        return EXIT_ARGS
    except (QuadratureError, FloatingPointError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
