"""Support-point tabulation and Dirichlet posterior weight draws.

A sample is collapsed onto its distinct joint records (the observed support of
the multinomial).  Under the Haldane prior the posterior on the support-point
probabilities is Dirichlet(n_1, ..., n_d); a draw is produced as normalised
independent Gamma(n_j, 1) variates.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

RNG_NAME = "numpy.Philox(SeedSequence(master_seed, spawn_key=(stream, m)))"


@dataclass(frozen=True)
class SupportTable:
    """Distinct rows of a dataset with their multiplicities.

    ``rows`` are kept as raw field tuples so that ties are decided on the
    text that was read, not on parsed floats.
    """

    rows: tuple[tuple[str, ...], ...]
    counts: np.ndarray
    index_map: np.ndarray
    first_index: np.ndarray

    @property
    def d(self) -> int:
        return len(self.rows)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def expand(self) -> list[tuple[str, ...]]:
        """Original records, in original order."""
        return [self.rows[j] for j in self.index_map]


@dataclass(frozen=True)
class WeightDraw:
    w: np.ndarray
    normalization: float
    draw_index: int
    seed_path: tuple[int, int, int]
    redraws: int = field(default=0)


def tabulate(records: Sequence[Sequence[object]]) -> SupportTable:
    """Collapse records onto distinct rows, in first-appearance order."""
    if len(records) == 0:
        raise ValueError("empty input")
    arity = len(records[0])
    keys: dict[tuple[str, ...], int] = {}
    rows: list[tuple[str, ...]] = []
    counts: list[int] = []
    first: list[int] = []
    index_map = np.empty(len(records), dtype=np.intp)
    for i, rec in enumerate(records):
        if len(rec) != arity:
            raise ValueError("inconsistent record arity")
        key = tuple(str(v) for v in rec)
        j = keys.get(key)
        if j is None:
            j = len(rows)
            keys[key] = j
            rows.append(key)
            counts.append(0)
            first.append(i)
        counts[j] += 1
        index_map[i] = j
    return SupportTable(
        rows=tuple(rows),
        counts=np.asarray(counts, dtype=np.int64),
        index_map=index_map,
        first_index=np.asarray(first, dtype=np.intp),
    )


def substream(master_seed: int, m: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for draw ``m`` of ``stream`` under ``master_seed``.

    Philox is counter based, and SeedSequence spawn keys give statistically
    independent streams for distinct ``(stream, m)`` pairs.
    """
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(stream), int(m)))
    return np.random.Generator(np.random.Philox(seq))


def sample_weights(
    table: SupportTable,
    rng: np.random.Generator,
    *,
    normalization: str | float = "n",
    draw_index: int = 1,
    seed_path: tuple[int, int, int] = (0, 0, 0),
) -> WeightDraw:
    """Draw one weight vector from the Dirichlet(counts) posterior.

    ``normalization`` is ``"n"`` (weights sum to the sample size), ``"one"``
    (weights are probabilities) or an explicit positive total.
    """
    total = _normalization_total(table, normalization)
    shape = table.counts.astype(float)
    g = rng.standard_gamma(shape)
    redraws = 0
    # shape >= 1 makes this practically unreachable; kept so a zero never
    # silently removes a support point
    while np.any(g == 0.0):
        zero = g == 0.0
        g[zero] = rng.standard_gamma(shape[zero])
        redraws += int(zero.sum())
    w = g / g.sum() * total
    return WeightDraw(
        w=w, normalization=total, draw_index=draw_index, seed_path=seed_path, redraws=redraws
    )


def draw_weights(
    table: SupportTable,
    master_seed: int,
    m: int,
    *,
    stream: int = 0,
    normalization: str | float = "n",
) -> WeightDraw:
    """Weight draw ``m`` from ``substream(master_seed, m, stream)``."""
    return sample_weights(
        table,
        substream(master_seed, m, stream),
        normalization=normalization,
        draw_index=m,
        seed_path=(int(master_seed), int(stream), int(m)),
    )


def weight_matrix(
    table: SupportTable,
    master_seed: int,
    draw_indices: Sequence[int],
    *,
    stream: int = 0,
    normalization: str | float = "n",
) -> np.ndarray:
    """Stack the weight vectors of several draws into a len(draw_indices) x d array."""
    out = np.empty((len(draw_indices), table.d))
    for k, m in enumerate(draw_indices):
        out[k] = draw_weights(
            table, master_seed, m, stream=stream, normalization=normalization
        ).w
    return out


def _normalization_total(table: SupportTable, normalization: str | float) -> float:
    if normalization == "n":
        return float(table.n)
    if normalization == "one":
        return 1.0
    total = float(normalization)
    if not total > 0:
        raise ValueError(f"normalization total must be positive, got {normalization!r}")
    return total
