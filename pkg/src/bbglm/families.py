"""Family/link pairs for the IWLS solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, xlogy

ETA_GUARD = 30.0
_MU_EPS = 1e-10


@dataclass(frozen=True)
class Family:
    """Base class.  Subclasses supply link, inverse link, dmu/deta, V(mu) and
    the unit deviance.  ``clamps`` says whether the linear predictor is
    clipped at +-ETA_GUARD before evaluating the mean."""

    name: str = "family"
    clamps: bool = False

    def link(self, mu):
        raise NotImplementedError

    def inverse(self, eta):
        raise NotImplementedError

    def dmu_deta(self, eta):
        raise NotImplementedError

    def variance(self, mu):
        raise NotImplementedError

    def unit_deviance(self, y, mu):
        raise NotImplementedError

    def start_mu(self, y, trials, weights):
        ybar = np.average(y, weights=weights * trials)
        return (y + ybar) / 2.0

    def check_response(self, y, trials):
        pass

    def clip_eta(self, eta):
        if not self.clamps:
            return eta
        return np.clip(eta, -ETA_GUARD, ETA_GUARD)


@dataclass(frozen=True)
class Gaussian(Family):
    name: str = "gaussian"

    def link(self, mu):
        return np.asarray(mu, dtype=float)

    def inverse(self, eta):
        return np.asarray(eta, dtype=float)

    def dmu_deta(self, eta):
        return np.ones_like(eta, dtype=float)

    def variance(self, mu):
        return np.ones_like(mu, dtype=float)

    def unit_deviance(self, y, mu):
        return (y - mu) ** 2


@dataclass(frozen=True)
class Binomial(Family):
    """Logit link.  ``y`` is the observed proportion; trials enter as weights."""

    name: str = "binomial"
    clamps: bool = True

    def link(self, mu):
        mu = np.asarray(mu, dtype=float)
        return np.log(mu) - np.log1p(-mu)

    def inverse(self, eta):
        return expit(eta)

    def dmu_deta(self, eta):
        mu = expit(eta)
        return mu * (1.0 - mu)

    def variance(self, mu):
        return mu * (1.0 - mu)

    def unit_deviance(self, y, mu):
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(y > 0, xlogy(y, y / mu), 0.0)
            b = np.where(y < 1, xlogy(1.0 - y, (1.0 - y) / (1.0 - mu)), 0.0)
        return 2.0 * (a + b)

    def start_mu(self, y, trials, weights):
        return (y * trials + 0.5) / (trials + 1.0)

    def check_response(self, y, trials):
        if np.any(y < 0) or np.any(y > 1):
            raise ValueError("binomial response must lie in [0, trials]")


@dataclass(frozen=True)
class Poisson(Family):
    name: str = "poisson"
    clamps: bool = True

    def link(self, mu):
        return np.log(mu)

    def inverse(self, eta):
        return np.exp(eta)

    def dmu_deta(self, eta):
        return np.exp(eta)

    def variance(self, mu):
        return np.asarray(mu, dtype=float)

    def unit_deviance(self, y, mu):
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(y > 0, xlogy(y, y / mu), 0.0)
        return 2.0 * (a - (y - mu))

    def start_mu(self, y, trials, weights):
        mu = super().start_mu(y, trials, weights)
        return np.maximum(mu, _MU_EPS)

    def check_response(self, y, trials):
        if np.any(y < 0):
            raise ValueError("poisson response must be non-negative")


FAMILIES: dict[str, Family] = {
    "gaussian": Gaussian(),
    "binomial": Binomial(),
    "poisson": Poisson(),
}


def get_family(family: str | Family) -> Family:
    if isinstance(family, Family):
        return family
    try:
        return FAMILIES[family]
    except KeyError:
        raise ValueError(
            f"unknown family {family!r}; choose from {sorted(FAMILIES)}"
        ) from None
