"""Weighted GLM maximum likelihood by iteratively reweighted least squares.

The solver is written over a batch of prior-weight vectors so that the
posterior engine can refit thousands of Dirichlet-weighted problems with
one set of array operations.  ``iwls_fit`` is the single-problem entry point
and goes through the same kernel with a batch of one.

Per iteration, with total weight ``W = prior * trials * (dmu/deta)^2 / V(mu)``
and working response ``z = eta + (y - mu) * deta/dmu``, the update is
``beta = (X'WX)^{-1} X'Wz``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from bbglm.families import ETA_GUARD, Family, get_family

TOL = 1e-8
MAX_ITER = 50
MAX_HALVINGS = 10
MAX_CLAMPED = 5
COND_LIMIT = 1e12

STATUSES = ("ok", "max-iter", "singular", "diverged")


@dataclass(frozen=True)
class FitResult:
    beta: np.ndarray
    eta: np.ndarray
    mu: np.ndarray
    deviance: float
    cov: np.ndarray
    se: np.ndarray
    iterations: int
    converged: bool
    status: str
    dispersion: float = 1.0

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class BatchFit:
    """Results of ``B`` weighted fits sharing one design."""

    beta: np.ndarray  # B x p
    mu: np.ndarray  # B x d
    deviance: np.ndarray
    iterations: np.ndarray
    status: np.ndarray  # B strings from STATUSES
    cov: np.ndarray | None = None  # B x p x p
    dispersion: np.ndarray | None = None


def deviance(y, mu, trials=None, prior_weights=None, family: str | Family = "gaussian") -> float:
    """Prior-weighted deviance sum(prior * trials * d(y, mu)).

    For binomial families ``y`` is the count of successes out of ``trials``.
    """
    fam = get_family(family)
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    t = np.ones_like(y) if trials is None else np.asarray(trials, dtype=float)
    pw = np.ones_like(y) if prior_weights is None else np.asarray(prior_weights, dtype=float)
    if fam.name == "binomial":
        y = y / t
    return float(np.sum(pw * t * fam.unit_deviance(y, mu)))


def prepare_response(y, trials, family: Family) -> tuple[np.ndarray, np.ndarray]:
    """Return (response on the mean scale, trials) and validate the domain."""
    y = np.asarray(y, dtype=float)
    if trials is None:
        t = np.ones_like(y)
        if family.name == "binomial" and not np.all((y == 0) | (y == 1)):
            raise ValueError("ungrouped binomial response must be 0/1")
    else:
        if family.name != "binomial":
            raise ValueError("trials are only meaningful for the binomial family")
        t = np.asarray(trials, dtype=float)
        if np.any(t <= 0) or np.any(y < 0) or np.any(y > t):
            raise ValueError("grouped binomial needs trials > 0 and 0 <= y <= trials")
        y = y / t
    family.check_response(y, t)
    return y, t


def iwls_fit(
    X,
    y,
    trials=None,
    prior_weights=None,
    family: str | Family = "gaussian",
    *,
    start_beta=None,
    start_mu=None,
    tol: float = TOL,
    max_iter: int = MAX_ITER,
    history: list | None = None,
) -> FitResult:
    """Fit one weighted GLM.

    ``start_mu`` is on the mean scale (fitted values of an earlier fit) and
    ``start_beta`` on the coefficient scale; with neither, the family default
    is used.  If ``history`` is a list, the deviance after each iteration is
    appended to it.
    """
    fam = get_family(family)
    X = np.asarray(X, dtype=float)
    yy, t = prepare_response(y, trials, fam)
    pw = np.ones_like(yy) if prior_weights is None else np.asarray(prior_weights, dtype=float)
    if pw.shape != yy.shape or X.shape[0] != yy.shape[0]:
        raise ValueError("dimension mismatch between X, y and prior_weights")
    if np.any(~(pw > 0)):
        raise ValueError("prior weights must be positive")
    batch = _iwls_kernel(
        X,
        yy,
        t,
        pw[None, :],
        fam,
        start_beta=None if start_beta is None else np.asarray(start_beta, dtype=float)[None, :],
        start_mu=None if start_mu is None else np.asarray(start_mu, dtype=float)[None, :],
        tol=tol,
        max_iter=max_iter,
        compute_cov=True,
        history=history,
    )
    beta = batch.beta[0]
    cov = batch.cov[0]
    dispersion = float(batch.dispersion[0])
    status = str(batch.status[0])
    return FitResult(
        beta=beta,
        eta=X @ beta,
        mu=batch.mu[0],
        deviance=float(batch.deviance[0]),
        cov=cov,
        se=np.sqrt(np.clip(np.diag(cov), 0.0, None)),
        iterations=int(batch.iterations[0]),
        converged=status == "ok",
        status=status,
        dispersion=dispersion,
    )


def iwls_fit_batch(
    X,
    y,
    trials,
    prior_weights,
    family: str | Family,
    *,
    start_beta=None,
    start_mu=None,
    tol: float = TOL,
    max_iter: int = MAX_ITER,
    compute_cov: bool = False,
) -> BatchFit:
    """Fit ``B`` weighted GLMs, one per row of ``prior_weights`` (B x d).

    Each row follows exactly the iteration of ``iwls_fit``; rows converge and
    stop independently.
    """
    fam = get_family(family)
    X = np.asarray(X, dtype=float)
    yy, t = prepare_response(y, trials, fam)
    pw = np.atleast_2d(np.asarray(prior_weights, dtype=float))
    if pw.shape[1] != yy.shape[0] or X.shape[0] != yy.shape[0]:
        raise ValueError("dimension mismatch between X, y and prior_weights")
    if np.any(~(pw > 0)):
        raise ValueError("prior weights must be positive")
    B = pw.shape[0]
    if start_beta is not None:
        start_beta = np.broadcast_to(np.asarray(start_beta, dtype=float), (B, X.shape[1]))
    if start_mu is not None:
        start_mu = np.broadcast_to(np.asarray(start_mu, dtype=float), pw.shape)
    return _iwls_kernel(
        X, yy, t, pw, fam,
        start_beta=start_beta, start_mu=start_mu, tol=tol, max_iter=max_iter,
        compute_cov=compute_cov,
    )


def _mean(fam: Family, eta):
    return fam.inverse(fam.clip_eta(eta))


def _deviance_rows(fam: Family, y, t, pw, mu):
    return np.sum(pw * t * fam.unit_deviance(y, mu), axis=1)


def _working(fam: Family, X, y, t, pw, eta, mu):
    """Weighted normal equations (X'WX, X'Wz) for each row of the batch."""
    ec = fam.clip_eta(eta)
    dmu = fam.dmu_deta(ec)
    w = pw * t * dmu**2 / fam.variance(mu)
    z = ec + (y - mu) / dmu
    Xw = w[:, :, None] * X[None, :, :]
    xtwx = np.matmul(Xw.transpose(0, 2, 1), X)
    xtwz = np.matmul(Xw.transpose(0, 2, 1), z[:, :, None])[:, :, 0]
    return xtwx, xtwz


def _solve(xtwx, rhs):
    """Eigen-solve of symmetric systems; returns (solution, singular flags)."""
    lam, V = np.linalg.eigh(xtwx)
    top = lam[:, -1]
    singular = ~(lam[:, 0] > 0) | ~(top / np.where(lam[:, 0] > 0, lam[:, 0], 1.0) <= COND_LIMIT)
    safe = np.where(singular[:, None], 1.0, lam)
    coef = np.matmul(V.transpose(0, 2, 1), rhs[:, :, None])[:, :, 0] / safe
    sol = np.matmul(V, coef[:, :, None])[:, :, 0]
    return sol, singular


def _inverse(xtwx):
    lam, V = np.linalg.eigh(xtwx)
    bad = ~(lam[:, 0] > 0)
    inv_lam = np.where(lam > 0, 1.0 / np.where(lam > 0, lam, 1.0), 0.0)
    inv = np.matmul(V * inv_lam[:, None, :], V.transpose(0, 2, 1))
    inv = 0.5 * (inv + inv.transpose(0, 2, 1))
    inv[bad] = np.nan
    return inv


def _iwls_kernel(X, y, t, pw, fam: Family, *, start_beta, start_mu, tol, max_iter,
                 compute_cov, history=None) -> BatchFit:
    B, d = pw.shape
    p = X.shape[1]
    if p > d:
        raise ValueError(f"more coefficients ({p}) than support points ({d})")

    if start_beta is not None:
        beta = np.array(start_beta, dtype=float)
        eta = beta @ X.T
        mu = _mean(fam, eta)
        have_beta = np.ones(B, dtype=bool)
    else:
        if start_mu is None:
            mu = np.stack([fam.start_mu(y, t, pw[b]) for b in range(B)])
        else:
            mu = np.array(start_mu, dtype=float)
        eta = fam.link(mu)
        beta = np.full((B, p), np.nan)
        have_beta = np.zeros(B, dtype=bool)
    dev = _deviance_rows(fam, y, t, pw, mu)

    status = np.full(B, "", dtype=object)
    iterations = np.zeros(B, dtype=np.int64)
    clamped_run = np.zeros(B, dtype=np.int64)
    active = np.ones(B, dtype=bool)
    separated = None

    for it in range(1, max_iter + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        iterations[idx] = it
        xtwx, xtwz = _working(fam, X, y, t, pw[idx], eta[idx], mu[idx])
        new_beta, singular = _solve(xtwx, xtwz)
        if singular.any():
            status[idx[singular]] = "singular"
            active[idx[singular]] = False
            keep = ~singular
            idx, new_beta = idx[keep], new_beta[keep]
            if idx.size == 0:
                continue

        new_eta = new_beta @ X.T
        new_mu = _mean(fam, new_eta)
        new_dev = _deviance_rows(fam, y, t, pw[idx], new_mu)

        # step halving towards the previous coefficients
        old_dev = dev[idx]
        hb = have_beta[idx]
        bad = ~np.isfinite(new_dev) | (hb & (new_dev > old_dev + 1e-12 * (np.abs(old_dev) + 0.1)))
        stuck = np.zeros(idx.size, dtype=bool)
        for _ in range(MAX_HALVINGS):
            fix = np.flatnonzero(bad & hb)
            if fix.size == 0:
                break
            new_beta[fix] = 0.5 * (new_beta[fix] + beta[idx[fix]])
            new_eta[fix] = new_beta[fix] @ X.T
            new_mu[fix] = _mean(fam, new_eta[fix])
            new_dev[fix] = _deviance_rows(fam, y, t, pw[idx[fix]], new_mu[fix])
            bad[fix] = ~np.isfinite(new_dev[fix]) | (
                new_dev[fix] > old_dev[fix] + 1e-12 * (np.abs(old_dev[fix]) + 0.1)
            )
        else:
            stuck = bad & hb

        nonfinite = ~np.isfinite(new_dev)
        if nonfinite.any():
            status[idx[nonfinite]] = "diverged"
            active[idx[nonfinite]] = False
        # the Newton direction cannot lower the deviance any further: keep
        # the previous coefficients as the optimum
        stuck &= ~nonfinite
        if stuck.any():
            status[idx[stuck]] = "ok"
            active[idx[stuck]] = False
        upd = ~nonfinite & ~stuck
        u = idx[upd]
        rel = np.abs(new_dev[upd] - dev[u]) / (np.abs(new_dev[upd]) + 0.1)
        beta[u] = new_beta[upd]
        eta[u] = new_eta[upd]
        mu[u] = new_mu[upd]
        dev[u] = new_dev[upd]
        have_beta[u] = True

        done = rel < tol
        if fam.clamps:
            hit = np.any(np.abs(new_eta[upd]) > ETA_GUARD, axis=1)
            clamped_run[u] = np.where(hit, clamped_run[u] + 1, 0)
            gone = (clamped_run[u] >= MAX_CLAMPED) & ~done
            # extreme but finite predictors are legitimate; only a separated
            # design (which no positive weighting can cure) is divergence
            if gone.any():
                if separated is None:
                    separated = _separated(X, y, fam)
                if separated:
                    status[u[gone]] = "diverged"
                    active[u[gone]] = False
                else:
                    gone[:] = False
        status[u[done]] = "ok"
        active[u[done]] = False
        if history is not None and B == 1 and u.size:
            history.append(float(dev[0]))

    status[active] = "max-iter"
    if fam.clamps:
        edge = (status == "ok") & np.any(np.abs(eta) > ETA_GUARD, axis=1)
        if edge.any():
            if separated is None:
                separated = _separated(X, y, fam)
            if separated:
                status[edge] = "diverged"

    cov = disp = None
    if compute_cov:
        xtwx, _ = _working(fam, X, y, t, pw, eta, mu)
        cov = _inverse(xtwx)
        disp = np.ones(B)
        if fam.name == "gaussian":
            rss = np.sum(pw * (y - mu) ** 2, axis=1)
            df = pw.sum(axis=1) - p
            disp = np.where(df > 0, rss / np.where(df > 0, df, 1.0), np.nan)
            cov = cov * disp[:, None, None]
    return BatchFit(
        beta=beta,
        mu=mu,
        deviance=dev,
        iterations=iterations,
        status=status.astype(str),
        cov=cov,
        dispersion=disp,
    )


def detect_separation(X, y, trials, family: str | Family, tol: float = 1e-7) -> bool:
    """True if some direction drives the likelihood to its supremum.

    Looks for ``delta != 0`` with ``x'delta <= 0`` on rows whose response sits
    at the lower boundary of its range, ``>= 0`` on rows at the upper
    boundary (binomial only) and ``= 0`` elsewhere.  Along such a direction
    the deviance decreases forever, so the MLE does not exist.  Positive prior
    weights do not change the answer.  Binomial ``y`` counts successes out of
    ``trials``, as in ``iwls_fit``.
    """
    fam = get_family(family)
    if not fam.clamps:
        return False
    yy, _ = prepare_response(y, trials, fam)
    return _separated(np.asarray(X, dtype=float), yy, fam, tol)


def _separated(X, y, fam: Family, tol: float = 1e-7) -> bool:
    lower = y <= 0
    upper = (y >= 1) if fam.name == "binomial" else np.zeros_like(lower)
    sign = np.where(lower, -1.0, np.where(upper, 1.0, 0.0))
    boundary = sign != 0
    if not boundary.any():
        return False
    scale = np.maximum(np.abs(X).max(axis=0), 1e-300)
    Xs = X / scale
    c = -(sign[boundary, None] * Xs[boundary]).sum(axis=0)
    A_ub = -(sign[boundary, None] * Xs[boundary])
    interior = ~boundary
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=np.zeros(A_ub.shape[0]),
        A_eq=Xs[interior] if interior.any() else None,
        b_eq=np.zeros(interior.sum()) if interior.any() else None,
        bounds=[(-1.0, 1.0)] * X.shape[1],
        method="highs",
    )
    return bool(res.status == 0 and -res.fun > tol)


def weighted_score(X, y, trials, prior_weights, family: str | Family, beta) -> np.ndarray:
    """X'W(z - X beta) at ``beta``; zero at the weighted MLE."""
    fam = get_family(family)
    X = np.asarray(X, dtype=float)
    yy, t = prepare_response(y, trials, fam)
    pw = np.ones_like(yy) if prior_weights is None else np.asarray(prior_weights, dtype=float)
    eta = X @ np.asarray(beta, dtype=float)
    ec = fam.clip_eta(eta)
    mu = fam.inverse(ec)
    dmu = fam.dmu_deta(ec)
    w = pw * t * dmu**2 / fam.variance(mu)
    z = ec + (yy - mu) / dmu
    return X.T @ (w * (z - eta))
