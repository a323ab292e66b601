"""Decay envelopes b(t) used by product-form and simulation-induced kernels.

An envelope is a strictly positive, bounded function on t >= 0 that
modulates the amplitude of a zero-mean process.  Two variants are
provided: a plain geometric decay and a geometric decay with an
oscillating factor kept strictly positive by a small offset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError

# Strict inequalities in the hyperparameter domains are enforced as
# half-open bounds so that downstream formulas stay non-singular.
LAMBDA_MAX = 1.0 - 1e-6


def _check(name, value, ok, bound):
    if not ok:
        raise DomainError(f"{name}={value!r} violates {bound}")


@dataclass(frozen=True)
class ExpDecay:
    """b(t) = sqrt(c) * lam**t with c >= 0 and 0 <= lam < 1."""

    c: float
    lam: float

    variant = "exp"

    def __post_init__(self):
        _check("c", self.c, self.c >= 0, "c >= 0")
        _check("lam", self.lam, 0 <= self.lam <= LAMBDA_MAX,
               f"0 <= lam <= {LAMBDA_MAX}")

    def b(self, t):
        t = np.asarray(t, dtype=float)
        return np.sqrt(self.c) * self.lam ** t

    def summable(self):
        """True iff sum_t b(t) < infinity (geometric, lam < 1)."""
        return True

    @property
    def decay_rate(self):
        return self.lam

    def to_dict(self):
        return {"variant": "exp", "c": self.c, "lam": self.lam}


@dataclass(frozen=True)
class ExpOsc:
    """b(t) = sqrt(c) * lam**t * (cos(omega*t) + 1 + eps), eps > 0."""

    c: float
    lam: float
    omega: float
    eps: float = 1e-6

    variant = "exp_osc"

    def __post_init__(self):
        _check("c", self.c, self.c >= 0, "c >= 0")
        _check("lam", self.lam, 0 <= self.lam <= LAMBDA_MAX,
               f"0 <= lam <= {LAMBDA_MAX}")
        _check("omega", self.omega, self.omega >= 0, "omega >= 0")
        _check("eps", self.eps, self.eps > 0, "eps > 0")

    def b(self, t):
        t = np.asarray(t, dtype=float)
        return (np.sqrt(self.c) * self.lam ** t
                * (np.cos(self.omega * t) + 1.0 + self.eps))

    def summable(self):
        """Bounded oscillation times a geometric factor is summable."""
        return True

    @property
    def decay_rate(self):
        return self.lam

    def to_dict(self):
        return {"variant": "exp_osc", "c": self.c, "lam": self.lam,
                "omega": self.omega, "eps": self.eps}


def envelope_from_dict(d):
    variant = d.get("variant")
    if variant == "exp":
        return ExpDecay(c=d["c"], lam=d["lam"])
    if variant == "exp_osc":
        return ExpOsc(c=d["c"], lam=d["lam"], omega=d["omega"],
                      eps=d.get("eps", 1e-6))
    raise DomainError(f"unknown envelope variant {variant!r}")
