"""Model specifications and design matrices.

A term is written as ``[alias=]part[:part...]`` where each part is a numeric
column ``x``, a whole factor ``F`` (expanded to one 0/1 dummy per
non-reference level) or a single factor level ``F[level]``.  Parts joined
with ``:`` are multiplied elementwise.  Examples: ``lv``, ``F:x``,
``CS=eth[N]:sex[F]``.
"""

from __future__ import annotations

import itertools
import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from bbglm.dataset import NUMERIC, Dataset

INTERCEPT = "(Intercept)"

_PART = re.compile(r"^([^\[\]:=]+?)(?:\[([^\[\]]*)\])?$")


@dataclass(frozen=True)
class ModelSpec:
    """What to regress on what.

    ``levels`` fixes the level order of a factor (first entry is the
    reference); otherwise the first level to appear in the data is the
    reference.  ``pinned`` names design columns that backward elimination
    must keep.
    """

    response: str
    terms: tuple[str, ...] = ()
    trials: str | None = None
    intercept: bool = True
    levels: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    pinned: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "pinned", tuple(self.pinned))
        object.__setattr__(
            self, "levels", {k: tuple(v) for k, v in dict(self.levels).items()}
        )

    def source_columns(self) -> list[str]:
        """Dataset columns referenced by the terms, in first-use order."""
        cols: dict[str, None] = {}
        for term in self.terms:
            _, parts = parse_term(term)
            for col, _ in parts:
                cols[col] = None
        return list(cols)

    def support_columns(self) -> list[str]:
        """Columns whose joint values define a support point."""
        cols = [self.response]
        if self.trials:
            cols.append(self.trials)
        cols += [c for c in self.source_columns() if c not in cols]
        return cols

    def drop(self, term: str) -> ModelSpec:
        if term not in self.terms:
            raise ValueError(f"no term {term!r} in model")
        return ModelSpec(
            response=self.response,
            terms=tuple(t for t in self.terms if t != term),
            trials=self.trials,
            intercept=self.intercept,
            levels=self.levels,
            pinned=self.pinned,
        )

    def to_dict(self) -> dict:
        return {
            "response": self.response,
            "trials": self.trials,
            "intercept": self.intercept,
            "terms": list(self.terms),
            "levels": {k: list(v) for k, v in self.levels.items()},
            "pinned": list(self.pinned),
        }


def parse_term(term: str) -> tuple[str | None, list[tuple[str, str | None]]]:
    """Split a term into (alias, [(column, level or None), ...])."""
    alias = None
    body = term.strip()
    if "=" in body:
        alias, body = (s.strip() for s in body.split("=", 1))
        if not alias:
            raise ValueError(f"empty alias in term {term!r}")
    parts = []
    for piece in body.split(":"):
        m = _PART.match(piece.strip())
        if not m:
            raise ValueError(f"cannot parse term {term!r}")
        parts.append((m.group(1).strip(), m.group(2)))
    return alias, parts


@dataclass(frozen=True)
class Column:
    """Recipe for one design column: a product of numeric columns and dummies."""

    name: str
    term: str
    factors: tuple[tuple[str, str | None], ...]

    def evaluate(self, data: Dataset) -> np.ndarray:
        out = np.ones(data.n_rows)
        for col, level in self.factors:
            if level is None:
                out = out * data.column(col)
            else:
                out = out * (np.asarray(data.raw[col], dtype=object) == level)
        return out


@dataclass(frozen=True)
class Design:
    spec: ModelSpec
    columns: tuple[Column, ...]
    X: np.ndarray
    y: np.ndarray
    trials: np.ndarray | None
    kinds: Mapping[str, str] = field(default_factory=dict)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def p(self) -> int:
        return len(self.columns)

    def term_of(self, name: str) -> str:
        for c in self.columns:
            if c.name == name:
                return c.term
        raise KeyError(name)

    def expand(self, data: Dataset | Mapping[str, Sequence]) -> np.ndarray:
        """Design rows for new covariate values, reusing this design's coding."""
        if not isinstance(data, Dataset):
            kinds = {k: self.kinds.get(k, NUMERIC) for k in data}
            data = Dataset.from_columns(dict(data), kinds=kinds)
        missing = [c for c in self.spec.source_columns() if c not in data]
        if missing:
            raise ValueError(f"grid lacks column(s) {missing}")
        if not self.columns:
            return np.empty((data.n_rows, 0))
        return np.column_stack([c.evaluate(data) for c in self.columns])


def factor_levels(data: Dataset, col: str, spec: ModelSpec) -> list[str]:
    present = data.levels(col)
    if col in spec.levels:
        order = list(spec.levels[col])
        unknown = [lv for lv in present if lv not in order]
        if unknown:
            raise ValueError(f"factor {col!r} has levels {unknown} missing from the declared order")
        return order
    return present


def build_design(data: Dataset, spec: ModelSpec, *, check_degenerate: bool = True) -> Design:
    """Materialise X (rows x p), y and trials for ``spec`` on ``data``.

    Columns come in term order with the intercept first.  A whole factor
    expands to dummies for its non-reference levels.
    """
    for col in spec.support_columns():
        if col not in data:
            raise ValueError(f"unknown column {col!r}")
    if data.kinds[spec.response] != NUMERIC:
        raise ValueError(f"response {spec.response!r} is not numeric")
    if spec.trials and data.kinds[spec.trials] != NUMERIC:
        raise ValueError(f"trials column {spec.trials!r} is not numeric")

    columns: list[Column] = []
    if spec.intercept:
        columns.append(Column(INTERCEPT, INTERCEPT, ()))
    for term in spec.terms:
        alias, parts = parse_term(term)
        choices = []
        for col, level in parts:
            if data.kinds[col] == NUMERIC:
                if level is not None:
                    raise ValueError(f"numeric column {col!r} cannot take a level")
                choices.append([(col, None, col)])
                continue
            levels = factor_levels(data, col, spec)
            if level is not None:
                if level not in levels:
                    raise ValueError(f"factor {col!r} has no level {level!r}")
                choices.append([(col, level, f"{col}[{level}]")])
                continue
            if len(levels) < 2:
                raise ValueError(f"factor {col!r} has a single level")
            choices.append([(col, lv, f"{col}[{lv}]") for lv in levels[1:]])
        combos = list(itertools.product(*choices))
        if alias is not None and len(combos) != 1:
            raise ValueError(f"alias {alias!r} needs a term that expands to one column")
        for combo in combos:
            name = alias if alias is not None else ":".join(label for _, _, label in combo)
            columns.append(Column(name, term, tuple((c, lv) for c, lv, _ in combo)))

    names = [c.name for c in columns]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ValueError(f"duplicate design column names {dupes}")
    n = data.n_rows
    X = np.column_stack([c.evaluate(data) for c in columns]) if columns else np.empty((n, 0))
    if check_degenerate and n:
        for j, c in enumerate(columns):
            if not np.any(X[:, j] != 0):
                raise ValueError(f"degenerate column {c.name!r}")
    y = data.column(spec.response)
    trials = data.column(spec.trials) if spec.trials else None
    kinds = {c: data.kinds[c] for c in spec.source_columns()}
    return Design(spec=spec, columns=tuple(columns), X=X, y=y, trials=trials, kinds=kinds)
