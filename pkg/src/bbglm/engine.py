"""Bayesian-bootstrap posterior for GLM coefficients.

Each posterior draw reweights the distinct support points of the sample by a
Dirichlet(counts) vector and refits the GLM by IWLS with those prior weights
multiplying the iterative weights.  The M refits are independent; they are
processed in fixed-size chunks so the output does not depend on how many
worker threads are used.
"""

from __future__ import annotations

import hashlib
import json
import os
from collections import Counter
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from bbglm.dataset import Dataset
from bbglm.design import Design, ModelSpec, build_design
from bbglm.families import Family, get_family
from bbglm.iwls import FitResult, iwls_fit, iwls_fit_batch
from bbglm.support import RNG_NAME, SupportTable, draw_weights, tabulate, weight_matrix

CHUNK = 256
MAX_EXCLUDED_FRACTION = 0.01
THREADS_ENV = "BBGLM_THREADS"

WeightSampler = Callable[[SupportTable, int], np.ndarray]


class FitFailure(RuntimeError):
    """The unweighted ML fit did not converge."""

    def __init__(self, status: str, message: str | None = None):
        self.status = status
        super().__init__(message or f"maximum likelihood fit failed with status {status!r}")


class UnstablePosterior(RuntimeError):
    def __init__(self, excluded: int, requested: int, statuses: Mapping[str, int]):
        self.excluded = excluded
        self.requested = requested
        self.statuses = dict(statuses)
        detail = ", ".join(f"{k}: {v}" for k, v in sorted(self.statuses.items()))
        super().__init__(
            f"unstable posterior: {excluded} of {requested} draws failed ({detail})"
        )


@dataclass(frozen=True)
class Problem:
    """A dataset and model reduced to its support points."""

    design: Design
    support: SupportTable
    family: Family
    X: np.ndarray
    y: np.ndarray
    trials: np.ndarray | None
    spec_hash: str

    @property
    def counts(self) -> np.ndarray:
        return self.support.counts.astype(float)


@dataclass(frozen=True)
class PosteriorDraws:
    beta_draws: np.ndarray  # M_requested x p; failed rows are kept but excluded
    statuses: np.ndarray
    excluded: np.ndarray
    M_requested: int
    master_seed: int
    stream: int
    spec_hash: str
    names: tuple[str, ...]
    family: str
    ml: FitResult
    problem: Problem
    normalization: str | float = "n"
    iterations: np.ndarray | None = None
    rng: str = RNG_NAME

    @property
    def M_effective(self) -> int:
        return self.M_requested - len(self.excluded)

    @property
    def retained(self) -> np.ndarray:
        """Draws from fits with status ok, in draw order."""
        keep = np.ones(self.M_requested, dtype=bool)
        keep[self.excluded] = False
        return self.beta_draws[keep]

    @property
    def p(self) -> int:
        return len(self.names)

    def column(self, name: str) -> np.ndarray:
        return self.retained[:, self.names.index(name)]

    def weights(self, m: int) -> np.ndarray:
        """The prior-weight vector used for draw ``m`` (1-based)."""
        return draw_weights(
            self.problem.support, self.master_seed, m,
            stream=self.stream, normalization=self.normalization,
        ).w

    def metadata(self) -> dict:
        return {
            "master_seed": int(self.master_seed),
            "stream": int(self.stream),
            "M_requested": int(self.M_requested),
            "M_effective": int(self.M_effective),
            "excluded": int(len(self.excluded)),
            "excluded_statuses": dict(Counter(self.statuses[self.excluded].tolist())),
            "family": self.family,
            "terms": list(self.names),
            "spec_hash": self.spec_hash,
            "rng": self.rng,
            "normalization": self.normalization,
            "support_points": int(self.problem.support.d),
            "n": int(self.problem.support.n),
        }


def prepare(data: Dataset, spec: ModelSpec, family: str | Family) -> Problem:
    """Build the design and collapse it onto distinct support points."""
    fam = get_family(family)
    design = build_design(data, spec)
    support = tabulate(data.records(spec.support_columns()))
    rows = support.first_index
    trials = None if design.trials is None else design.trials[rows]
    blob = json.dumps(
        {"rows": support.rows, "counts": support.counts.tolist(),
         "spec": spec.to_dict(), "family": fam.name},
        sort_keys=True,
    )
    return Problem(
        design=design,
        support=support,
        family=fam,
        X=design.X[rows],
        y=design.y[rows],
        trials=trials,
        spec_hash=hashlib.sha256(blob.encode()).hexdigest()[:16],
    )


def fit_ml(problem: Problem, start_mu=None) -> FitResult:
    """Unweighted ML fit on the support (prior weights = multiplicities).

    ``start_mu`` holds fitted values per original observation.
    """
    if start_mu is not None:
        start_mu = np.asarray(start_mu, dtype=float)[problem.support.first_index]
    return iwls_fit(problem.X, problem.y, problem.trials, problem.counts,
                    problem.family, start_mu=start_mu)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_posterior(
    data: Dataset,
    spec: ModelSpec,
    family: str | Family,
    M: int = 1000,
    master_seed: int = 0,
    *,
    stream: int = 0,
    normalization: str | float = "n",
    allow_exclusions: bool = False,
    workers: int | None = None,
    start_mu=None,
    weight_sampler: WeightSampler | None = None,
) -> PosteriorDraws:
    """Draw ``M`` coefficient vectors from the Bayesian-bootstrap posterior.

    Draw ``m`` uses weights from ``substream(master_seed, m, stream)`` and is
    warm-started at the unweighted ML coefficients.  ``weight_sampler``
    replaces the Dirichlet sampler (test hook); it receives the support table
    and ``m`` and returns the weight vector.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    problem = prepare(data, spec, family)
    ml = fit_ml(problem, start_mu=start_mu)
    if not ml.ok:
        raise FitFailure(ml.status)

    chunks = [list(range(lo, min(lo + CHUNK, M + 1))) for lo in range(1, M + 1, CHUNK)]

    def run_chunk(ms: Sequence[int]):
        if weight_sampler is None:
            W = weight_matrix(problem.support, master_seed, ms, stream=stream,
                              normalization=normalization)
        else:
            W = np.stack([np.asarray(weight_sampler(problem.support, m), dtype=float) for m in ms])
        return iwls_fit_batch(problem.X, problem.y, problem.trials, W, problem.family,
                              start_beta=ml.beta)

    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(chunks) == 1:
        results = [run_chunk(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_chunk, chunks))

    beta = np.concatenate([r.beta for r in results])
    statuses = np.concatenate([r.status for r in results])
    iterations = np.concatenate([r.iterations for r in results])
    excluded = np.flatnonzero(statuses != "ok")
    if len(excluded) > MAX_EXCLUDED_FRACTION * M and not allow_exclusions:
        raise UnstablePosterior(len(excluded), M, Counter(statuses[excluded].tolist()))
    return PosteriorDraws(
        beta_draws=beta,
        statuses=statuses,
        excluded=excluded,
        M_requested=M,
        master_seed=master_seed,
        stream=stream,
        spec_hash=problem.spec_hash,
        names=tuple(problem.design.names),
        family=problem.family.name,
        ml=ml,
        problem=problem,
        normalization=normalization,
        iterations=iterations,
    )


def functional_draws(draws: PosteriorDraws, contrast) -> np.ndarray:
    """c'beta for every retained draw, in draw order."""
    c = np.asarray(contrast, dtype=float)
    if c.shape != (draws.p,):
        raise ValueError(f"contrast has length {c.size}, model has {draws.p} coefficients")
    return draws.retained @ c


def grid_matrix(draws: PosteriorDraws, grid) -> np.ndarray:
    """Expand ``grid`` (Dataset, column mapping, or ready design rows)."""
    if isinstance(grid, (Dataset, Mapping)):
        return draws.problem.design.expand(grid)
    G = np.atleast_2d(np.asarray(grid, dtype=float))
    if G.shape[1] != draws.p:
        raise ValueError(f"grid rows need {draws.p} columns")
    return G


def curve_draws(draws: PosteriorDraws, grid, family: str | Family | None = None) -> np.ndarray:
    """Fitted means on the grid, one row per retained draw."""
    fam = get_family(family or draws.family)
    G = grid_matrix(draws, grid)
    return fam.inverse(draws.retained @ G.T)


def equal_weights(table: SupportTable, m: int) -> np.ndarray:
    """Weight sampler giving every observation weight one (reproduces ML)."""
    return table.counts.astype(float)
