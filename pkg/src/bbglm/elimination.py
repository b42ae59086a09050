"""Dummy-level backward elimination driven by posterior mean/sd ratios.

Factors are expanded into individual 0/1 dummies and products of dummies, and
each becomes a separately droppable design column.  Nothing enforces model
hierarchy: a product can stay after one of its parents has gone.
"""

from __future__ import annotations

import itertools
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from bbglm.dataset import Dataset
from bbglm.design import INTERCEPT, ModelSpec, build_design
from bbglm.engine import FitFailure, UnstablePosterior, run_posterior
from bbglm.families import Family, get_family
from bbglm.summaries import SummaryTable, summarize


@dataclass(frozen=True)
class Factor:
    column: str
    levels: tuple[str, ...]  # first level is the reference

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if len(self.levels) < 2:
            raise ValueError(f"factor {self.column!r} needs at least two levels")


def _dummies(alias: str, factor: Factor) -> list[tuple[str, tuple[str, str]]]:
    if len(factor.levels) == 2:
        return [(alias, (factor.column, factor.levels[1]))]
    return [
        (f"{alias}{k + 1}", (factor.column, level))
        for k, level in enumerate(factor.levels)
        if k > 0
    ]


def expand_terms(
    factors: Mapping[str, Factor],
    interactions: Sequence[Sequence[str]] = (),
    main_effects: Sequence[str] | None = None,
) -> list[str]:
    """Candidate dummy and product columns as aliased term strings.

    A two-level factor ``C`` gives one dummy named ``C``; a factor ``A`` with
    four levels gives ``A2``, ``A3``, ``A4``.  An interaction ``("C", "A")``
    gives the products ``CA2``, ``CA3``, ``CA4``.
    """
    dummies = {alias: _dummies(alias, f) for alias, f in factors.items()}
    order = list(factors) if main_effects is None else list(main_effects)
    terms: list[tuple[str, list[tuple[str, str]]]] = []
    for alias in order:
        for name, part in dummies[alias]:
            terms.append((name, [part]))
    for combo in interactions:
        unknown = [a for a in combo if a not in dummies]
        if unknown:
            raise ValueError(f"unknown factor alias(es) {unknown}")
        for pick in itertools.product(*(dummies[a] for a in combo)):
            terms.append(("".join(n for n, _ in pick), [p for _, p in pick]))
    if not terms:
        raise ValueError("empty candidate set")
    names = [n for n, _ in terms]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ValueError(f"duplicate candidate names {dupes}")
    return [f"{name}=" + ":".join(f"{c}[{lv}]" for c, lv in parts) for name, parts in terms]


# Coding that reproduces the published absence analysis: culture C (1 = non
# Aboriginal), sex S (1 = the "F" level of the distributed data), learner
# status L (1 = average learner), and age groups A2..A4 against primary.
ABSENCE_FACTORS = {
    "C": Factor("eth", ("A", "N")),
    "S": Factor("sex", ("M", "F")),
    "L": Factor("lrn", ("SL", "AL")),
    "A": Factor("age", ("F0", "F1", "F2", "F3")),
}
ABSENCE_INTERACTIONS = (("C", "S"), ("C", "L"), ("S", "L"), ("C", "S", "L"), ("C", "A"), ("S", "A"))
ABSENCE_FINAL = ("C", "S", "CS", "CL", "CSL", "A3", "A4", "CA2", "CA3", "SA3", "SA4")


def absence_candidates() -> list[str]:
    return expand_terms(ABSENCE_FACTORS, ABSENCE_INTERACTIONS)


def absence_spec(terms: Sequence[str] | None = None) -> ModelSpec:
    return ModelSpec(response="days", terms=tuple(terms or absence_candidates()))


def explode_terms(data: Dataset, spec: ModelSpec) -> ModelSpec:
    """Rewrite ``spec`` so that each design column is its own named term."""
    design = build_design(data, spec)
    terms = []
    for col in design.columns:
        if col.name == INTERCEPT:
            continue
        body = ":".join(c if lv is None else f"{c}[{lv}]" for c, lv in col.factors)
        terms.append(f"{col.name}={body}")
    return ModelSpec(response=spec.response, terms=tuple(terms), trials=spec.trials,
                     intercept=spec.intercept, levels=spec.levels, pinned=spec.pinned)


@dataclass(frozen=True)
class EliminationStep:
    step: int
    summary: SummaryTable
    dropped: str | None
    dropped_ratio: float | None
    remaining: int  # non-intercept columns left after this step


@dataclass
class EliminationTrace:
    steps: list[EliminationStep]
    final_spec: ModelSpec
    threshold: float
    M_step: int
    master_seed: int
    family: str
    failure: str | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dropped(self) -> list[str]:
        return [s.dropped for s in self.steps if s.dropped is not None]

    @property
    def final_summary(self) -> SummaryTable:
        return self.steps[-1].summary

    @property
    def final_terms(self) -> list[str]:
        return [n for n in self.final_summary.names if n != INTERCEPT]


class EliminationError(RuntimeError):
    def __init__(self, trace: EliminationTrace, reason: str):
        self.trace = trace
        super().__init__(reason)


def backward_eliminate(
    data: Dataset,
    initial_spec: ModelSpec,
    family: str | Family = "poisson",
    threshold: float = 2.0,
    M_step: int = 1000,
    master_seed: int = 0,
    *,
    level: float = 0.95,
    workers: int | None = None,
    allow_exclusions: bool = False,
) -> EliminationTrace:
    """Drop the weakest dummy until every |pmean|/psd reaches ``threshold``.

    Step ``s`` (1-based) draws its weights from stream ``s`` of
    ``master_seed`` and warm-starts from the previous model's fitted values.
    Equal ratios are resolved by dropping the later column.  The intercept and
    ``initial_spec.pinned`` columns are never dropped, and neither is the last
    remaining column of a model without intercept.
    """
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    fam = get_family(family)
    spec = explode_terms(data, initial_spec)
    trace = EliminationTrace(steps=[], final_spec=spec, threshold=threshold, M_step=M_step,
                             master_seed=master_seed, family=fam.name)
    start_mu = None
    step = 0
    while True:
        step += 1
        try:
            draws = run_posterior(data, spec, fam, M_step, master_seed, stream=step,
                                  start_mu=start_mu, workers=workers,
                                  allow_exclusions=allow_exclusions)
        except (FitFailure, UnstablePosterior) as exc:
            trace.failure = f"step {step}: {exc}"
            raise EliminationError(trace, trace.failure) from exc
        summary = summarize(draws, level=level)
        trace.meta = draws.metadata()
        names = list(summary.names)
        droppable = [k for k, n in enumerate(names) if n != INTERCEPT and n not in spec.pinned]
        if len(names) == 1:
            droppable = []  # never empty the design
        ratios = summary.ratio
        pick = None
        if droppable:
            r = ratios[droppable]
            low = np.min(r)
            if low < threshold:
                # later column wins ties
                pick = droppable[max(i for i, v in enumerate(r) if v == low)]
        n_terms = len(spec.terms)
        if pick is None:
            trace.steps.append(EliminationStep(step, summary, None, None, n_terms))
            trace.final_spec = spec
            return trace
        name = names[pick]
        trace.steps.append(EliminationStep(step, summary, name, float(ratios[pick]), n_terms - 1))
        start_mu = draws.ml.mu[draws.problem.support.index_map]
        spec = spec.drop(_term_named(spec, name))
        trace.final_spec = spec


def _term_named(spec: ModelSpec, name: str) -> str:
    for t in spec.terms:
        if t.split("=", 1)[0].strip() == name:
            return t
    raise KeyError(name)
