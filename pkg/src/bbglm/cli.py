"""Command-line interface.

Exit status: 0 on success, 1 on usage or input errors, 2 on numerical
failure (a failure report is written where an output path was given).
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from bbglm import dataset as ds
from bbglm.design import ModelSpec
from bbglm.elimination import (
    EliminationError,
    absence_candidates,
    backward_eliminate,
)
from bbglm.engine import (
    FitFailure,
    UnstablePosterior,
    equal_weights,
    fit_ml,
    prepare,
    run_posterior,
)
from bbglm.reports import (
    dumps,
    failure_report,
    fit_report,
    mean_ci_report,
    posterior_report,
    read_matrix_csv,
    support_report,
    trace_report,
    write_band_csv,
    write_density_csv,
    write_draws_csv,
    write_report,
)
from bbglm.summaries import band_table, classical_intervals, ecdf, kde, summarize
from bbglm.support import tabulate

log = logging.getLogger("bbglm")

CANDIDATE_PRESETS = {"absence": absence_candidates}


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    def __init__(self, report: dict, path: str | None):
        self.report = report
        self.path = path
        super().__init__(report["message"])


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _split(text: str | None) -> list[str]:
    if not text:
        return []
    return [t.strip() for t in text.split(",") if t.strip()]


def _pairs(items, flag: str) -> list[tuple[str, str]]:
    out = []
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"{flag} expects NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out.append((k.strip(), v.strip()))
    return out


def add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True,
                   help="CSV path, or @income / @vaso / @absence for a bundled dataset")
    p.add_argument("--kind", action="append", metavar="COL=numeric|categorical",
                   help="override column type inference")
    p.add_argument("--derive", action="append", metavar="NAME=EXPR",
                   help="add a derived numeric column, e.g. lv=log(volume)")


def add_model_args(p: argparse.ArgumentParser, family_default: str | None = None) -> None:
    p.add_argument("--family", choices=["gaussian", "binomial", "poisson"],
                   required=family_default is None, default=family_default)
    p.add_argument("--response", required=True)
    p.add_argument("--trials", help="trials column (grouped binomial)")
    p.add_argument("--terms", default="", help="comma-separated term list")
    p.add_argument("--no-intercept", action="store_true")
    p.add_argument("--levels", action="append", metavar="COL=L1/L2/...",
                   help="factor level order; the first level is the reference")


def load_data(args) -> ds.Dataset:
    kinds = {}
    for k, v in _pairs(args.kind, "--kind"):
        if v not in (ds.NUMERIC, ds.CATEGORICAL):
            raise UsageError(f"--kind {k}: expected numeric or categorical")
        kinds[k] = v
    data = ds.load(args.data, kinds=kinds or None)
    for name, expr in _pairs(args.derive, "--derive"):
        data = data.derive(name, expr)
    return data


def model_spec(args, terms=None) -> ModelSpec:
    if args.trials and args.family != "binomial":
        raise UsageError("--trials requires --family binomial")
    levels = {k: tuple(v.split("/")) for k, v in _pairs(args.levels, "--levels")}
    return ModelSpec(
        response=args.response,
        terms=tuple(terms if terms is not None else _split(args.terms)),
        trials=args.trials,
        intercept=not args.no_intercept,
        levels=levels,
    )


def _emit(report: dict, path: str | None) -> None:
    if path:
        write_report(report, path)
    else:
        sys.stdout.write(dumps(report))


def cmd_tabulate(args) -> int:
    data = load_data(args)
    cols = _split(args.columns) or list(data.names)
    for c in cols:
        if c not in data:
            raise UsageError(f"unknown column {c!r}")
    table = tabulate(data.records(cols))
    _emit(support_report(table, cols, data.source), args.out)
    return 0


def cmd_fit(args) -> int:
    data = load_data(args)
    spec = model_spec(args)
    problem = prepare(data, spec, args.family)
    fit = fit_ml(problem)
    report = fit_report(fit, problem.design.names, args.family, spec, data.source)
    _emit(report, args.out)
    if not fit.ok:
        return 2
    if args.out:
        for name, b, s in zip(problem.design.names, fit.beta, fit.se):
            print(f"{name:<20} {b: .4f} ({s:.4f})")
    return 0


def _posterior(args, data, spec):
    sampler = equal_weights if args.equal_weights else None
    try:
        return run_posterior(
            data, spec, args.family, args.draws, args.seed,
            normalization=args.normalization, allow_exclusions=args.allow_exclusions,
            workers=args.threads, weight_sampler=sampler,
        )
    except FitFailure as exc:
        raise NumericalFailure(
            failure_report("posterior", exc.status, str(exc), family=args.family,
                           terms=list(spec.terms), master_seed=args.seed,
                           M_requested=args.draws),
            getattr(args, "out_summary", None) or getattr(args, "out", None),
        ) from exc
    except UnstablePosterior as exc:
        raise NumericalFailure(
            failure_report("posterior", "unstable", str(exc), family=args.family,
                           terms=list(spec.terms), master_seed=args.seed,
                           M_requested=args.draws, excluded=exc.excluded),
            getattr(args, "out_summary", None) or getattr(args, "out", None),
        ) from exc


def add_posterior_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--draws", type=int, default=1000, help="number of posterior draws M")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $BBGLM_THREADS or 1)")
    p.add_argument("--normalization", choices=["n", "one"], default="n",
                   help="weights sum to the sample size or to one")
    p.add_argument("--allow-exclusions", action="store_true",
                   help="accept more than 1%% failed refits")
    p.add_argument("--equal-weights", action="store_true", help=argparse.SUPPRESS)


def cmd_bb(args) -> int:
    data = load_data(args)
    spec = model_spec(args)
    if args.draws < 1:
        raise UsageError("--draws must be positive")
    draws = _posterior(args, data, spec)
    summary = summarize(draws, level=args.level)
    report = posterior_report(summary, draws, data.source)
    if args.out_draws:
        write_draws_csv(draws, args.out_draws)
    _emit(report, args.out_summary)
    if args.out_summary:
        print(summary.format())
    return 0


def parse_grid(items) -> dict[str, list]:
    grid: dict[str, list] = {}
    for name, value in _pairs(items, "--grid"):
        if ":" in value:
            parts = value.split(":")
            if len(parts) != 3:
                raise UsageError(f"--grid {name}: expected START:STOP:NUM")
            start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
            grid[name] = np.linspace(start, stop, num).tolist()
        else:
            vals = [v for v in value.split(",") if v]
            try:
                grid[name] = [float(v) for v in vals]
            except ValueError:
                grid[name] = vals
    if not grid:
        raise UsageError("--grid is required")
    size = max(len(v) for v in grid.values())
    for k, v in grid.items():
        if len(v) == 1:
            grid[k] = v * size
        elif len(v) != size:
            raise UsageError("--grid columns must have equal lengths (or length 1)")
    return grid


def cmd_bands(args) -> int:
    data = load_data(args)
    spec = model_spec(args)
    grid = parse_grid(args.grid)
    draws = _posterior(args, data, spec)
    table = band_table(draws, grid, level=args.level)
    write_band_csv(table, args.out)
    return 0


def cmd_density(args) -> int:
    if args.data:
        data = load_data(args)
        if args.column not in data or data.kinds[args.column] != ds.NUMERIC:
            raise UsageError(f"no numeric column {args.column!r}")
        xs = data.column(args.column)
    elif args.draws:
        header, mat = read_matrix_csv(args.draws)
        if args.column not in header:
            raise UsageError(f"no column {args.column!r} in {args.draws}")
        xs = mat[:, header.index(args.column)]
    else:
        raise UsageError("give --data or --draws")
    write_density_csv(ecdf(xs), kde(xs), args.out)
    return 0


def cmd_eliminate(args) -> int:
    data = load_data(args)
    if args.candidates in CANDIDATE_PRESETS:
        terms = CANDIDATE_PRESETS[args.candidates]()
    else:
        terms = _split(args.candidates)
    base = model_spec(args, terms=terms)
    spec = ModelSpec(response=base.response, terms=base.terms, trials=base.trials,
                     intercept=base.intercept, levels=base.levels, pinned=tuple(_split(args.pin)))
    try:
        trace = backward_eliminate(
            data, spec, args.family, args.threshold, args.draws_per_step, args.seed,
            level=args.level, workers=args.threads, allow_exclusions=args.allow_exclusions,
        )
    except EliminationError as exc:
        write_report(trace_report(exc.trace, data.source), args.out)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    write_report(trace_report(trace, data.source), args.out)
    print(trace.final_summary.format())
    return 0


def cmd_mean_ci(args) -> int:
    data = load_data(args)
    if args.response not in data or data.kinds[args.response] != ds.NUMERIC:
        raise UsageError(f"no numeric column {args.response!r}")
    ci = classical_intervals(data.column(args.response), args.population_size, args.level)
    _emit(mean_ci_report(ci, args.response, data.source), args.out)
    return 0


def build_parser() -> Parser:
    parser = Parser(prog="bbglm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("tabulate", help="distinct support points with counts")
    add_data_args(p)
    p.add_argument("--columns", help="columns defining a support point (default: all)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_tabulate)

    p = sub.add_parser("fit", help="unweighted ML fit by IWLS")
    add_data_args(p)
    add_model_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bb", help="Bayesian-bootstrap posterior draws and summary")
    add_data_args(p)
    add_model_args(p)
    add_posterior_args(p)
    p.add_argument("--out-draws")
    p.add_argument("--out-summary")
    p.set_defaults(func=cmd_bb)

    p = sub.add_parser("bands", help="ML and Bayes bands for the fitted mean on a grid")
    add_data_args(p)
    add_model_args(p)
    add_posterior_args(p)
    p.add_argument("--grid", action="append", metavar="COL=START:STOP:NUM|v1,v2,...")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bands)

    p = sub.add_parser("density", help="ECDF and kernel density curves")
    p.add_argument("--data")
    p.add_argument("--kind", action="append")
    p.add_argument("--derive", action="append")
    p.add_argument("--draws", help="draws CSV written by `bb --out-draws`")
    p.add_argument("--column", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("eliminate", help="backward elimination by |pmean|/psd")
    add_data_args(p)
    add_model_args(p, family_default="poisson")
    p.add_argument("--candidates", required=True,
                   help="comma-separated candidate terms, or a preset name (absence)")
    p.add_argument("--pin", help="comma-separated columns never dropped")
    p.add_argument("--threshold", type=float, default=2.0)
    p.add_argument("--draws-per-step", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--allow-exclusions", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eliminate)

    p = sub.add_parser("mean-ci", help="classical and finite-population intervals for a mean")
    add_data_args(p)
    p.add_argument("--response", required=True)
    p.add_argument("--population-size", type=int)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--out")
    p.set_defaults(func=cmd_mean_ci)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        if exc.path:
            write_report(exc.report, exc.path)
        else:
            sys.stdout.write(dumps(exc.report))
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
