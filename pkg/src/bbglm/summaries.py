"""Posterior summaries, credible intervals, ECDF/KDE curves and bands."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid

from bbglm.families import Family, get_family
from bbglm.iwls import FitResult

MIN_DRAWS = 20


def _finite(xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if not np.all(np.isfinite(xs)):
        raise ValueError("draws contain non-finite values")
    return xs


def central_interval(xs, level: float = 0.95) -> tuple[float, float]:
    """Equal-tailed interval from linearly interpolated order statistics.

    The q-quantile sits at position h = (n - 1) q + 1 of the sorted sample.
    """
    xs = _finite(xs).ravel()
    if xs.size < 2:
        raise ValueError("need at least two draws")
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    a = (1.0 - level) / 2.0
    lo, hi = np.quantile(xs, [a, 1.0 - a], method="linear")
    return float(lo), float(hi)


@dataclass(frozen=True)
class SummaryTable:
    names: tuple[str, ...]
    pmean: np.ndarray
    psd: np.ndarray
    median: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    M_effective: int
    metadata: dict = field(default_factory=dict)

    @property
    def ratio(self) -> np.ndarray:
        """|pmean| / psd; infinite for a constant non-zero column, 0 for a constant zero one."""
        a = np.abs(self.pmean)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(self.psd > 0, a / np.where(self.psd > 0, self.psd, 1.0),
                         np.where(a > 0, np.inf, 0.0))
        return r

    def row(self, name: str) -> dict:
        k = self.names.index(name)
        return {
            "name": name,
            "pmean": float(self.pmean[k]),
            "psd": float(self.psd[k]),
            "median": float(self.median[k]),
            "lower": float(self.lower[k]),
            "upper": float(self.upper[k]),
            "ratio": float(self.ratio[k]),
        }

    def rows(self) -> list[dict]:
        return [self.row(n) for n in self.names]

    def format(self, digits: int = 2) -> str:
        w = max(len(n) for n in self.names)
        head = f"{'term':<{w}}  {'pmean':>8} {'psd':>8} {'median':>8} {'lower':>8} {'upper':>8} {'ratio':>7}"
        lines = [head]
        for r in self.rows():
            lines.append(
                f"{r['name']:<{w}}  {r['pmean']:8.{digits}f} {r['psd']:8.{digits}f} "
                f"{r['median']:8.{digits}f} {r['lower']:8.{digits}f} {r['upper']:8.{digits}f} "
                f"{r['ratio']:7.{digits}f}"
            )
        return "\n".join(lines)


def summarize(draws, level: float = 0.95, names: Sequence[str] | None = None) -> SummaryTable:
    """Columnwise posterior summaries of a draw matrix or ``PosteriorDraws``."""
    metadata = {}
    if hasattr(draws, "retained"):
        names = names or draws.names
        metadata = draws.metadata()
        B = draws.retained
    else:
        B = np.asarray(draws, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
    B = _finite(B)
    if B.shape[0] < MIN_DRAWS:
        raise ValueError("too few draws to summarize")
    if names is None:
        names = [f"b{j}" for j in range(B.shape[1])]
    a = (1.0 - level) / 2.0
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    lo, med, hi = np.quantile(B, [a, 0.5, 1.0 - a], axis=0, method="linear")
    return SummaryTable(
        names=tuple(names),
        pmean=B.mean(axis=0),
        psd=B.std(axis=0, ddof=1),
        median=med,
        lower=lo,
        upper=hi,
        level=level,
        M_effective=B.shape[0],
        metadata=metadata,
    )


@dataclass(frozen=True)
class ECDF:
    """Right-continuous empirical distribution function."""

    x: np.ndarray  # sorted distinct values
    p: np.ndarray  # F at each value
    n: int

    def __call__(self, t):
        k = np.searchsorted(self.x, t, side="right")
        return np.where(k > 0, self.p[np.maximum(k - 1, 0)], 0.0)

    def inverse(self, q: float) -> float:
        """Smallest value whose ECDF reaches ``q``."""
        k = np.searchsorted(self.p, q - 1e-12, side="left")
        return float(self.x[min(k, len(self.x) - 1)])


def ecdf(xs) -> ECDF:
    xs = _finite(xs).ravel()
    if xs.size == 0:
        raise ValueError("need at least one value")
    values, counts = np.unique(xs, return_counts=True)
    return ECDF(x=values, p=np.cumsum(counts) / xs.size, n=xs.size)


def silverman_bandwidth(xs) -> float:
    xs = np.asarray(xs, dtype=float)
    sd = xs.std(ddof=1)
    q75, q25 = np.quantile(xs, [0.75, 0.25])
    spread = min(sd, (q75 - q25) / 1.34)
    if spread <= 0:
        spread = sd
    return 0.9 * spread * xs.size ** (-0.2)


def kde(xs, points: int = 512, bandwidth: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian kernel density on a grid spanning the data +- 3 bandwidths.

    The curve is rescaled so that its trapezoid integral over the grid is one.
    """
    xs = _finite(xs).ravel()
    if xs.size < 2:
        raise ValueError("need at least two draws")
    if not xs.std() > 0:
        raise ValueError("zero standard deviation: density undefined")
    h = silverman_bandwidth(xs) if bandwidth is None else float(bandwidth)
    grid = np.linspace(xs.min() - 3 * h, xs.max() + 3 * h, points)
    dens = np.zeros(points)
    for lo in range(0, xs.size, 2048):
        u = (grid[:, None] - xs[None, lo:lo + 2048]) / h
        dens += np.exp(-0.5 * u * u).sum(axis=1)
    dens /= xs.size * h * np.sqrt(2 * np.pi)
    dens /= trapezoid(dens, grid)
    return grid, dens


@dataclass(frozen=True)
class ClassicalIntervals:
    n: int
    mean: float
    variance: float  # divisor n
    variance_unbiased: float  # divisor n - 1
    level: float
    z_interval: tuple[float, float]
    t_interval: tuple[float, float]
    population_size: int | None = None
    fpc: float | None = None
    fpc_interval: tuple[float, float] | None = None
    fpc_interval_variance: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def classical_intervals(y, population_size: int | None = None, level: float = 0.95) -> ClassicalIntervals:
    """Large-sample, Student-t and finite-population intervals for a mean.

    The large-sample interval is mean +- z * sqrt(variance / n) with the
    divisor-n variance.  ``fpc_interval`` shrinks that half-width by the
    factor (1 - n/N); ``fpc_interval_variance`` applies (1 - n/N) to the
    variance instead.
    """
    y = _finite(y).ravel()
    n = y.size
    if n < 2:
        raise ValueError("need at least two observations")
    mean = float(y.mean())
    var_n = float(y.var())
    var_u = float(y.var(ddof=1))
    z = stats.norm.ppf(0.5 + level / 2)
    t = stats.t.ppf(0.5 + level / 2, n - 1)
    hz = z * np.sqrt(var_n / n)
    ht = t * np.sqrt(var_u / n)
    out = dict(
        n=n, mean=mean, variance=var_n, variance_unbiased=var_u, level=level,
        z_interval=(float(mean - hz), float(mean + hz)),
        t_interval=(float(mean - ht), float(mean + ht)),
    )
    if population_size is not None:
        N = int(population_size)
        if N < n:
            raise ValueError("population size smaller than the sample")
        f = 1.0 - n / N
        out.update(
            population_size=N,
            fpc=f,
            fpc_interval=(float(mean - f * hz), float(mean + f * hz)),
            fpc_interval_variance=(float(mean - np.sqrt(f) * hz), float(mean + np.sqrt(f) * hz)),
        )
    return ClassicalIntervals(**out)


@dataclass(frozen=True)
class BandTable:
    grid: np.ndarray  # rows x k covariate values (or a 1-d coordinate)
    ml_fit: np.ndarray
    ml_lower: np.ndarray
    ml_upper: np.ndarray
    bayes_median: np.ndarray | None = None
    bayes_lower: np.ndarray | None = None
    bayes_upper: np.ndarray | None = None
    level: float = 0.95
    grid_names: tuple[str, ...] = ()


def ml_bands(fit: FitResult, G, family: str | Family, level: float = 0.95):
    """Wald band on the linear-predictor scale, mapped through the inverse link.

    Returns (fitted, lower, upper) at the design rows ``G``.
    """
    if fit.status != "ok":
        raise ValueError(f"fit status is {fit.status!r}")
    fam = get_family(family)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    eta = G @ fit.beta
    se = np.sqrt(np.clip(np.einsum("ij,jk,ik->i", G, fit.cov, G), 0.0, None))
    z = stats.norm.ppf(0.5 + level / 2)
    return fam.inverse(eta), fam.inverse(eta - z * se), fam.inverse(eta + z * se)


def bayes_bands(curves, level: float = 0.95):
    """Pointwise posterior median and central interval of curve draws."""
    C = _finite(curves)
    a = (1.0 - level) / 2.0
    lo, med, hi = np.quantile(C, [a, 0.5, 1.0 - a], axis=0, method="linear")
    return med, lo, hi


def band_table(draws, grid, level: float = 0.95, grid_names: Sequence[str] = ()) -> BandTable:
    """ML and Bayes bands on ``grid`` for a posterior run."""
    from bbglm.engine import curve_draws, grid_matrix

    G = grid_matrix(draws, grid)
    fit, lo, hi = ml_bands(draws.ml, G, draws.family, level)
    med, blo, bhi = bayes_bands(curve_draws(draws, G), level)
    if isinstance(grid, dict):
        names = tuple(grid)
        coords = np.column_stack([np.asarray(grid[k]) for k in names])
    else:
        names = tuple(grid_names) or tuple(draws.names)
        coords = G
    return BandTable(
        grid=coords, ml_fit=fit, ml_lower=lo, ml_upper=hi,
        bayes_median=med, bayes_lower=blo, bayes_upper=bhi, level=level, grid_names=names,
    )
