"""Command-line entry point: ``python -m fastrates <command> ...``.

Commands::

    bench build [--seed S] [--gamma G]      dump benchmark parameters as JSON
    sweep run --config FILE [--out CSV]     run a replication sweep
    sweep slope --csv FILE                  refit the log-log slope of a run CSV
    bounds --constants FILE [--n-grid ...]  tabulate closed-form bounds (CSV)
    margin profile --config FILE            empirical margin profile
    tabular regime --config FILE            exact-optimality fraction per n

Exit codes: 0 success, 2 configuration error, 3 sweep failure threshold exceeded.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
from pathlib import Path

from . import experiment as ex
from .synthetic_benchmark import BenchmarkSpec, build_benchmark
from .theory_bounds import RateConstants, bounds_table


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ex.ConfigError(f"cannot read {path}: {exc}") from exc


def _bench_build(args):
    try:
        spec = BenchmarkSpec(seed=args.seed, gamma=args.gamma)
    except ValueError as exc:
        raise ex.ConfigError(str(exc)) from exc
    print(build_benchmark(spec).dump_params())


def _curve_summary(curve: ex.RegretCurve, out):
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["n", "count", "mean", "median", "std_error", "ci_lo", "ci_hi"])
    for s in curve.per_n:
        w.writerow([s["n"], s["count"]] + [repr(s[k]) for k in
                   ("mean", "median", "std_error", "ci_lo", "ci_hi")])
    if curve.degenerate:
        print("# slope: degenerate (fewer than three positive points)", file=out)
    else:
        print(f"# slope {curve.slope!r} ci [{curve.slope_ci[0]!r}, {curve.slope_ci[1]!r}] "
              f"intercept {curve.intercept!r}", file=out)


def _sweep_run(args):
    config = ex.parse_config(_read(args.config))
    curve, text = ex.run_sweep(config)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    _curve_summary(curve, sys.stderr if not args.out else sys.stdout)


def _sweep_slope(args):
    rows = ex.csv_to_rows(_read(args.csv))
    config = ex.SweepConfig(n_grid=tuple(sorted({r["n"] for r in rows})) or (1,),
                            ci_level=args.ci_level, fit_on=args.fit_on)
    _curve_summary(ex.curve_from_rows(rows, config), sys.stdout)


def _bounds(args):
    fields = {f.name: f.type for f in dataclasses.fields(RateConstants)}
    values = {}
    text = _read(args.constants)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                key, _, value = line.partition("=")
                doc[key.strip()] = value.strip()
    for key, value in doc.items():
        if key not in fields:
            raise ex.ConfigError(f"unknown constant {key!r}")
        values[key] = float(value) if key != "d" else int(value)
    k = RateConstants(**values)
    rows = bounds_table(k, args.n_grid)
    w = csv.writer(sys.stdout, lineterminator="\n")
    cols = ["n", "fqi_an", "msbo_an", "thm1", "cor7"]
    w.writerow(cols)
    for r in rows:
        w.writerow(["" if r[c] is None else repr(r[c]) for c in cols])


def _margin_profile(args):
    config = ex.parse_config(_read(args.config), ex.MarginConfig)
    profile = ex.margin_profile(config)
    sys.stdout.write(profile.to_csv())
    print(profile.to_json())


def _tabular_regime(args):
    config = ex.parse_config(_read(args.config))
    report = ex.tabular_regime_report(config)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "replications", "fraction_optimal", "fraction_zero_regret", "mean_regret"])
    for r in report:
        w.writerow([r["n"], r["replications"], repr(r["fraction_optimal"]),
                    repr(r["fraction_zero_regret"]), repr(r["mean_regret"])])
    sys.stdout.write(buf.getvalue())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fastrates", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench").add_subparsers(dest="action", required=True)
    for name in ("build", "dump-params"):
        b = bench.add_parser(name, help="dump benchmark parameters as JSON")
        b.add_argument("--seed", type=int, default=0)
        b.add_argument("--gamma", type=float, default=0.9)
        b.set_defaults(func=_bench_build)

    sweep = sub.add_parser("sweep").add_subparsers(dest="action", required=True)
    run = sweep.add_parser("run")
    run.add_argument("--config", required=True)
    run.add_argument("--out")
    run.set_defaults(func=_sweep_run)
    slope = sweep.add_parser("slope")
    slope.add_argument("--csv", required=True)
    slope.add_argument("--ci-level", type=float, default=0.75)
    slope.add_argument("--fit-on", choices=("mean", "points"), default="mean")
    slope.set_defaults(func=_sweep_slope)

    bounds = sub.add_parser("bounds")
    bounds.add_argument("--constants", required=True)
    bounds.add_argument("--n-grid", type=int, nargs="+",
                        default=[10 ** k for k in range(2, 11)])
    bounds.set_defaults(func=_bounds)

    margin = sub.add_parser("margin").add_subparsers(dest="action", required=True)
    prof = margin.add_parser("profile")
    prof.add_argument("--config", required=True)
    prof.set_defaults(func=_margin_profile)

    tab = sub.add_parser("tabular").add_subparsers(dest="action", required=True)
    reg = tab.add_parser("regime")
    reg.add_argument("--config", required=True)
    reg.set_defaults(func=_tabular_regime)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        args.func(args)
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ex.SweepFailure as exc:
        print(f"sweep failed: {exc}", file=sys.stderr)
        return 3
    return 0
