"""Stationary correlation functions k_c(r) normalized so that k_c(0) = 1.

Each variant evaluates elementwise on arrays of (possibly negative) lags;
all variants are even in the lag, so callers may pass |t - s| or t - s
interchangeably.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .envelopes import LAMBDA_MAX, _check
from .exceptions import DomainError


@dataclass(frozen=True)
class DCCorr:
    """Geometric correlation rho**|r|."""

    rho: float

    variant = "dc"

    def __post_init__(self):
        _check("rho", self.rho, abs(self.rho) <= 1, "|rho| <= 1")

    def corr(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        if self.rho == 0.0:
            return np.where(r == 0, 1.0, 0.0)
        return np.sign(self.rho) ** r * np.abs(self.rho) ** r

    def to_dict(self):
        return {"variant": "dc", "rho": self.rho}


@dataclass(frozen=True)
class SSCorr:
    """Correlation factor of the second-order stable spline kernel."""

    lam: float

    variant = "ss"

    def __post_init__(self):
        _check("lam", self.lam, 0 <= self.lam <= LAMBDA_MAX,
               f"0 <= lam <= {LAMBDA_MAX}")

    def corr(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        return 1.5 * self.lam ** r - 0.5 * self.lam ** (3 * r)

    def to_dict(self):
        return {"variant": "ss", "lam": self.lam}


@dataclass(frozen=True)
class SquaredExponential:
    """exp(-beta * r**2), beta > 0."""

    beta: float

    variant = "se"

    def __post_init__(self):
        _check("beta", self.beta, self.beta > 0, "beta > 0")

    def corr(self, r):
        r = np.asarray(r, dtype=float)
        return np.exp(-self.beta * r * r)

    def to_dict(self):
        return {"variant": "se", "beta": self.beta}


@dataclass(frozen=True)
class Matern:
    """Matern correlation for half-integer nu in {1/2, 3/2, 5/2}.

    Restricted to half-integer orders so evaluation stays elementary.
    """

    beta: float
    nu: float

    variant = "matern"

    def __post_init__(self):
        _check("beta", self.beta, self.beta > 0, "beta > 0")
        _check("nu", self.nu, self.nu in (0.5, 1.5, 2.5),
               "nu in {0.5, 1.5, 2.5}")

    def corr(self, r):
        x = self.beta * math.sqrt(2 * self.nu) * np.abs(np.asarray(r, float))
        if self.nu == 0.5:
            return np.exp(-x)
        if self.nu == 1.5:
            y = math.sqrt(3) / math.sqrt(2 * self.nu) * x
            return (1 + y) * np.exp(-y)
        y = math.sqrt(5) / math.sqrt(2 * self.nu) * x
        return (1 + y + y * y / 3.0) * np.exp(-y)

    def to_dict(self):
        return {"variant": "matern", "beta": self.beta, "nu": self.nu}


@dataclass(frozen=True)
class BesselJ:
    """Damped-oscillation correlation (alpha*r)**(-nu) * J_nu(alpha*r).

    The normalization constant 2**nu * Gamma(nu + 1) is the reciprocal of
    the r -> 0 limit of (alpha*r)**(-nu) * J_nu(alpha*r), so corr(0) = 1.
    """

    alpha: float
    nu: float

    variant = "besselj"

    def __post_init__(self):
        _check("alpha", self.alpha, self.alpha > 0, "alpha > 0")
        _check("nu", self.nu, self.nu >= -0.5, "nu >= -1/2")

    def corr(self, r):
        from scipy.special import jv

        x = self.alpha * np.abs(np.asarray(r, dtype=float))
        scale = 2.0 ** self.nu * math.gamma(self.nu + 1.0)
        out = np.empty_like(x)
        small = x < 1e-12
        out[small] = 1.0
        xs = x[~small]
        out[~small] = scale * xs ** (-self.nu) * jv(self.nu, xs)
        return out

    def to_dict(self):
        return {"variant": "besselj", "alpha": self.alpha, "nu": self.nu}


@dataclass(frozen=True)
class Cosine:
    """cos(alpha * r)."""

    alpha: float

    variant = "cosine"

    def __post_init__(self):
        _check("alpha", self.alpha, self.alpha >= 0, "alpha >= 0")

    def corr(self, r):
        return np.cos(self.alpha * np.asarray(r, dtype=float))

    def to_dict(self):
        return {"variant": "cosine", "alpha": self.alpha}


@dataclass(frozen=True)
class Sinc:
    """sin(alpha*r) / (alpha*r), with the removable singularity at r = 0."""

    alpha: float

    variant = "sinc"

    def __post_init__(self):
        _check("alpha", self.alpha, self.alpha > 0, "alpha > 0")

    def corr(self, r):
        x = self.alpha * np.asarray(r, dtype=float)
        return np.sinc(x / np.pi)

    def to_dict(self):
        return {"variant": "sinc", "alpha": self.alpha}


@dataclass(frozen=True)
class UnitCorr:
    """Constant correlation 1; the rank-1 kernels use it."""

    variant = "unit"

    def corr(self, r):
        return np.ones_like(np.asarray(r, dtype=float))

    def to_dict(self):
        return {"variant": "unit"}


_VARIANTS = {
    "dc": lambda d: DCCorr(rho=d["rho"]),
    "ss": lambda d: SSCorr(lam=d["lam"]),
    "se": lambda d: SquaredExponential(beta=d["beta"]),
    "matern": lambda d: Matern(beta=d["beta"], nu=d["nu"]),
    "besselj": lambda d: BesselJ(alpha=d["alpha"], nu=d["nu"]),
    "cosine": lambda d: Cosine(alpha=d["alpha"]),
    "sinc": lambda d: Sinc(alpha=d["alpha"]),
    "unit": lambda d: UnitCorr(),
}


def corr_from_dict(d):
    variant = d.get("variant")
    if variant not in _VARIANTS:
        raise DomainError(f"unknown stationary correlation variant {variant!r}")
    return _VARIANTS[variant](d)
