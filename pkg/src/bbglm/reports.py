"""Structured reports (JSON, stable key order) and CSV outputs.

Every report carries a ``meta`` block with the tool version, report kind,
master seed, draw counts, family, term list and excluded-draw count; fields
that do not apply are null.  Schemas live in ``bbglm/schemas`` and
``validate_report`` checks a report against the schema for its kind.
"""

from __future__ import annotations

import csv
import json
import math
from functools import cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from bbglm import __version__
from bbglm.support import RNG_NAME

SCHEMA_KINDS = ("support", "fit", "posterior", "trace", "mean-ci", "failure")


def meta(kind: str, *, family=None, terms=None, master_seed=None, M_requested=None,
         M_effective=None, excluded=None, **extra) -> dict:
    out = {
        "tool": "bbglm",
        "version": __version__,
        "kind": kind,
        "master_seed": master_seed,
        "M_requested": M_requested,
        "M_effective": M_effective,
        "excluded": excluded,
        "family": family,
        "terms": None if terms is None else list(terms),
    }
    out.update(extra)
    return out


def _clean(obj):
    """JSON-safe copy: numpy scalars to python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def support_report(table, columns, source: str) -> dict:
    return {
        "meta": meta("support", source=source, columns=list(columns)),
        "n": table.n,
        "d": table.d,
        "rows": [
            {"values": list(row), "count": int(c)} for row, c in zip(table.rows, table.counts)
        ],
    }


def fit_report(fit, names, family: str, spec, source: str) -> dict:
    return _clean({
        "meta": meta("fit", family=family, terms=names, source=source, spec=spec.to_dict()),
        "status": fit.status,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "deviance": fit.deviance,
        "dispersion": fit.dispersion,
        "coefficients": [
            {"name": n, "estimate": b, "se": s} for n, b, s in zip(names, fit.beta, fit.se)
        ],
        "cov": fit.cov,
    })


def posterior_report(summary, draws, source: str) -> dict:
    md = draws.metadata()
    return _clean({
        "meta": meta(
            "posterior",
            family=md["family"], terms=md["terms"], master_seed=md["master_seed"],
            M_requested=md["M_requested"], M_effective=md["M_effective"],
            excluded=md["excluded"], source=source, rng=md["rng"], stream=md["stream"],
            spec_hash=md["spec_hash"], normalization=md["normalization"],
            excluded_statuses=md["excluded_statuses"], support_points=md["support_points"],
            n=md["n"], exclusion_policy="failed refits are excluded, never resampled",
        ),
        "level": summary.level,
        "ml": [
            {"name": n, "estimate": b, "se": s}
            for n, b, s in zip(draws.names, draws.ml.beta, draws.ml.se)
        ],
        "parameters": summary.rows(),
    })


def trace_report(trace, source: str) -> dict:
    md = trace.meta
    return _clean({
        "meta": meta(
            "trace",
            family=trace.family, terms=trace.final_terms if trace.steps else None,
            master_seed=trace.master_seed, M_requested=trace.M_step,
            M_effective=md.get("M_effective"), excluded=md.get("excluded"),
            source=source, rng=RNG_NAME,
        ),
        "threshold": trace.threshold,
        "draws_per_step": trace.M_step,
        "failure": trace.failure,
        "final_spec": trace.final_spec.to_dict(),
        "steps": [
            {
                "step": s.step,
                "dropped": s.dropped,
                "dropped_ratio": s.dropped_ratio,
                "remaining": s.remaining,
                "M_effective": s.summary.M_effective,
                "parameters": s.summary.rows(),
            }
            for s in trace.steps
        ],
    })


def mean_ci_report(ci, response: str, source: str) -> dict:
    return _clean({
        "meta": meta("mean-ci", source=source, response=response),
        **ci.to_dict(),
    })


def failure_report(kind: str, status: str, message: str, **extra) -> dict:
    return _clean({
        "meta": meta("failure", failed=kind, **extra),
        "status": status,
        "message": message,
    })


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, allow_nan=False) + "\n"


def write_report(report: dict, path) -> None:
    Path(path).write_text(dumps(report), encoding="utf-8")


@cache
def schema(kind: str) -> dict:
    text = resources.files("bbglm").joinpath("schemas").joinpath(f"{kind}.json").read_text(
        encoding="utf-8"
    )
    return json.loads(text)


def validate_report(report: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if the report does not match its schema."""
    kind = report.get("meta", {}).get("kind")
    if kind not in SCHEMA_KINDS:
        raise ValueError(f"unknown report kind {kind!r}")
    jsonschema.validate(report, schema(kind))


def _fmt(x) -> str:
    return repr(float(x))


def write_draws_csv(draws, path) -> None:
    """Retained draws, one row per draw, one column per coefficient."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(draws.names)
        for row in draws.retained:
            w.writerow([_fmt(v) for v in row])


def write_band_csv(table, path) -> None:
    cols = ["ml_fit", "ml_lower", "ml_upper", "bayes_median", "bayes_lower", "bayes_upper"]
    grid = np.atleast_2d(np.asarray(table.grid, dtype=float))
    if grid.shape[0] != len(table.ml_fit):
        grid = grid.T
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(table.grid_names) + cols)
        for i in range(len(table.ml_fit)):
            w.writerow([_fmt(v) for v in grid[i]] + [_fmt(getattr(table, c)[i]) for c in cols])


def write_density_csv(ecdf, kde_curve, path) -> None:
    """ECDF steps and KDE curve in long format: curve, x, y."""
    grid, dens = kde_curve
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["curve", "x", "y"])
        for x, p in zip(ecdf.x, ecdf.p):
            w.writerow(["ecdf", _fmt(x), _fmt(p)])
        for x, y in zip(grid, dens):
            w.writerow(["kde", _fmt(x), _fmt(y)])


def read_matrix_csv(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
