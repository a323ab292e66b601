"""Kernel families for impulse-response regularization.

Every family evaluates k(t, s; theta) on nonnegative integer lags with
numpy broadcasting, builds Gram matrices, and samples zero-mean Gaussian
process realizations.  Most families factor into a rank-1 amplitude part
b(t)b(s) and a stationary correlation part k_c(t - s) with k_c(0) = 1;
that factorization is exposed where it exists and drives both sampling
interpretation and the fast stability checks in :mod:`kernelreg.analysis`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import statespace
from .envelopes import LAMBDA_MAX, ExpDecay, ExpOsc, _check, envelope_from_dict
from .exceptions import DomainError, NumericalError, UnsupportedKernelError
from .stationary import Cosine, DCCorr, SSCorr, UnitCorr, corr_from_dict

AMLS2OD_EPS = 1e-6  # fixed offset keeping the oscillating envelope positive


@dataclass(frozen=True)
class HyperParams:
    """Ordered hyperparameter vector with its feasible box."""

    names: tuple
    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if not (len(self.names) == values.size == lower.size == upper.size):
            raise DomainError("names, values, lower, upper must have "
                              "equal lengths")
        for name, v, lo, hi in zip(self.names, values, lower, upper):
            if not lo <= v <= hi:
                raise DomainError(f"{name}={v} violates {lo} <= {name} <= {hi}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def as_dict(self):
        return dict(zip(self.names, self.values.tolist()))


class Kernel:
    """Base class; subclasses are immutable and safe to share."""

    family = "base"

    def amls_factors(self):
        """(envelope b(t) callable, correlation k_c(r) callable) or None."""
        return None

    def eval(self, t, s):
        """k(t, s) with numpy broadcasting over nonnegative lags."""
        factors = self.amls_factors()
        if factors is None:
            raise NotImplementedError
        b, corr = factors
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        if np.any(t < 0) or np.any(s < 0):
            raise DomainError("t, s must be >= 0")
        out = b(t) * b(s) * corr(np.abs(t - s))
        return out if out.ndim else float(out)

    def gram(self, grid):
        grid = np.asarray(grid)
        if grid.size and (np.any(np.diff(grid) <= 0) or grid.min() < 0):
            raise DomainError("grid must be strictly increasing and "
                              "nonnegative")
        K = np.asarray(self.eval(grid[:, None], grid[None, :]), dtype=float)
        i_low = np.tril_indices(grid.size, -1)
        K[i_low[1], i_low[0]] = K[i_low]  # mirror: exactly symmetric
        return K

    def params(self):
        raise NotImplementedError

    def hyperparams(self) -> Optional[HyperParams]:
        return None

    def to_dict(self):
        return {"family": self.family, "params": self.params(),
                "seedless": True}


def _box_params(names, values, bounds):
    lower = [bounds[n][0] for n in names]
    upper = [bounds[n][1] for n in names]
    return HyperParams(names=tuple(names), values=np.array(values, float),
                       lower=np.array(lower, float),
                       upper=np.array(upper, float))


@dataclass(frozen=True)
class SSKernel(Kernel):
    """Stable-spline kernel, geometric parameterization.

    k(t,s) = c * lam**(3(t+s)) * (lam**|t-s| / 2 - lam**(3|t-s|) / 6),
    the original form with lam = exp(-beta/2).
    """

    c: float
    lam: float

    family = "ss"

    def __post_init__(self):
        _check("c", self.c, self.c >= 0, "c >= 0")
        _check("lam", self.lam, 0 <= self.lam <= LAMBDA_MAX,
               f"0 <= lam <= {LAMBDA_MAX}")

    def amls_factors(self):
        env = ExpDecay(c=self.c / 3, lam=self.lam ** 3)
        return env.b, SSCorr(lam=self.lam).corr

    def params(self):
        return {"c": self.c, "lam": self.lam}

    def hyperparams(self):
        return _box_params(("c", "lam"), (self.c, self.lam),
                           {"c": (0, np.inf), "lam": (0, LAMBDA_MAX)})


@dataclass(frozen=True)
class DCKernel(Kernel):
    """Diagonal/correlated kernel c * lam**((t+s)/2) * rho**|t-s|."""

    c: float
    lam: float
    rho: float

    family = "dc"

    def __post_init__(self):
        _check("c", self.c, self.c >= 0, "c >= 0")
        _check("lam", self.lam, 0 <= self.lam <= LAMBDA_MAX,
               f"0 <= lam <= {LAMBDA_MAX}")
        _check("rho", self.rho, abs(self.rho) <= 1, "|rho| <= 1")

    def amls_factors(self):
        env = ExpDecay(c=self.c, lam=math.sqrt(self.lam))
        return env.b, DCCorr(rho=self.rho).corr

    def params(self):
        return {"c": self.c, "lam": self.lam, "rho": self.rho}

    def hyperparams(self):
        return _box_params(("c", "lam", "rho"), (self.c, self.lam, self.rho),
                           {"c": (0, np.inf), "lam": (0, LAMBDA_MAX),
                            "rho": (-1, 1)})


@dataclass(frozen=True)
class TCKernel(Kernel):
    """Tuned/correlated kernel c * min(lam**t, lam**s)."""

    c: float
    lam: float

    family = "tc"

    def __post_init__(self):
        _check("c", self.c, self.c >= 0, "c >= 0")
        _check("lam", self.lam, 0 <= self.lam <= LAMBDA_MAX,
               f"0 <= lam <= {LAMBDA_MAX}")

    def amls_factors(self):
        # min(lam^t, lam^s) = lam^((t+s)/2) * lam^(|t-s|/2)
        env = ExpDecay(c=self.c, lam=math.sqrt(self.lam))
        return env.b, DCCorr(rho=math.sqrt(self.lam)).corr

    def params(self):
        return {"c": self.c, "lam": self.lam}

    def hyperparams(self):
        return _box_params(("c", "lam"), (self.c, self.lam),
                           {"c": (0, np.inf), "lam": (0, LAMBDA_MAX)})


@dataclass(frozen=True)
class AMLSKernel(Kernel):
    """Generic amplitude-modulated locally stationary kernel.

    k(t,s) = b(t) b(s) k_c(t-s) for an arbitrary envelope/correlation pair.
    """

    envelope: object
    corr: object

    family = "amls"

    def amls_factors(self):
        return self.envelope.b, self.corr.corr

    def params(self):
        return {"envelope": self.envelope.to_dict(),
                "corr": self.corr.to_dict()}


@dataclass(frozen=True)
class AMLS2OsKernel(Kernel):
    """Oscillation in the stationary part: c * lam**(t+s) * cos(alpha|t-s|)."""

    c: float
    lam: float
    alpha: float

    family = "amls2os"

    def __post_init__(self):
        _check("c", self.c, self.c >= 0, "c >= 0")
        _check("lam", self.lam, 0 <= self.lam <= LAMBDA_MAX,
               f"0 <= lam <= {LAMBDA_MAX}")
        _check("alpha", self.alpha, 0 <= self.alpha <= math.pi,
               "0 <= alpha <= pi (aliases on integer lags beyond pi)")

    def amls_factors(self):
        env = ExpDecay(c=self.c, lam=self.lam)
        return env.b, Cosine(alpha=self.alpha).corr

    def params(self):
        return {"c": self.c, "lam": self.lam, "alpha": self.alpha}

    def hyperparams(self):
        return _box_params(("c", "lam", "alpha"),
                           (self.c, self.lam, self.alpha),
                           {"c": (0, np.inf), "lam": (0, LAMBDA_MAX),
                            "alpha": (0, math.pi)})


@dataclass(frozen=True)
class AMLS2OdKernel(Kernel):
    """Oscillation in the envelope:

    k(t,s) = c * lam**(t+s) * (cos(w t)+1+eps)(cos(w s)+1+eps) * rho**|t-s|
    with eps fixed to 1e-6.
    """

    c: float
    lam: float
    omega: float
    rho: float

    family = "amls2od"

    def __post_init__(self):
        _check("c", self.c, self.c >= 0, "c >= 0")
        _check("lam", self.lam, 0 <= self.lam <= LAMBDA_MAX,
               f"0 <= lam <= {LAMBDA_MAX}")
        _check("omega", self.omega, 0 <= self.omega <= math.pi,
               "0 <= omega <= pi")
        _check("rho", self.rho, abs(self.rho) <= 1, "|rho| <= 1")

    def amls_factors(self):
        env = ExpOsc(c=self.c, lam=self.lam, omega=self.omega,
                     eps=AMLS2OD_EPS)
        return env.b, DCCorr(rho=self.rho).corr

    def params(self):
        return {"c": self.c, "lam": self.lam, "omega": self.omega,
                "rho": self.rho}

    def hyperparams(self):
        return _box_params(("c", "lam", "omega", "rho"),
                           (self.c, self.lam, self.omega, self.rho),
                           {"c": (0, np.inf), "lam": (0, LAMBDA_MAX),
                            "omega": (0, math.pi), "rho": (-1, 1)})


@dataclass(frozen=True)
class SI2OdKernel(Kernel):
    """Closed-form damped-oscillation kernel of an underdamped nominal model.

    Continuous-time formula sampled on the integer grid.  `scale`
    multiplies the unit-variance-uncertainty formula so the prior can
    match the data magnitude during tuning.
    """

    omega0: float
    xi: float
    gamma: float
    scale: float = 1.0

    family = "si2od"

    def __post_init__(self):
        _check("scale", self.scale, self.scale >= 0, "scale >= 0")
        # domain checks delegated to SecondOrderNominal
        object.__setattr__(self, "_nominal", statespace.SecondOrderNominal(
            omega0=self.omega0, xi=self.xi, gamma=self.gamma))

    @property
    def nominal(self):
        return self._nominal

    def eval(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        if np.any(t < 0) or np.any(s < 0):
            raise DomainError("t, s must be >= 0")
        out = self.scale * statespace.si2od_closed(self._nominal, t, s)
        return out if np.ndim(out) else float(out)

    def params(self):
        return {"omega0": self.omega0, "xi": self.xi, "gamma": self.gamma,
                "scale": self.scale}

    def hyperparams(self):
        return _box_params(("scale", "omega0", "xi", "gamma"),
                           (self.scale, self.omega0, self.xi, self.gamma),
                           {"scale": (0, np.inf), "omega0": (0, np.inf),
                            "xi": (0, 1 - 1e-3), "gamma": (0, np.inf)})


@dataclass(frozen=True)
class SIStateSpaceKernel(Kernel):
    """Simulation-induced kernel backed by an explicit state-space model."""

    model: statespace.StateSpaceModel

    family = "si_statespace"

    def eval(self, t, s):
        t_arr = np.asarray(t)
        s_arr = np.asarray(s)
        if t_arr.ndim == 0 and s_arr.ndim == 0:
            return statespace.si_kernel_dt(self.model, int(t_arr), int(s_arr))
        tb, sb = np.broadcast_arrays(t_arr, s_arr)
        out = np.empty(tb.shape)
        for idx in np.ndindex(tb.shape):
            out[idx] = statespace.si_kernel_dt(self.model, int(tb[idx]),
                                               int(sb[idx]))
        return out

    def gram(self, grid):
        return statespace.si_gram(self.model, grid)

    def params(self):
        return {"model": self.model.to_dict()}


@dataclass(frozen=True)
class OracleKernel(Kernel):
    """Rank-1 kernel g0(t) g0(s) built from a known impulse response.

    g0 is indexed from lag 1; lags outside 1..len(g0) evaluate to zero.
    """

    g0: tuple

    family = "oracle"

    def __post_init__(self):
        object.__setattr__(self, "g0", tuple(float(v) for v in self.g0))
        if len(self.g0) == 0:
            raise DomainError("g0 must be nonempty")

    def _lookup(self, t):
        t = np.asarray(t)
        g = np.asarray(self.g0)
        idx = np.clip(t.astype(int) - 1, 0, len(self.g0) - 1)
        vals = g[idx]
        mask = (t >= 1) & (t <= len(self.g0)) & (t == np.floor(t))
        return np.where(mask, vals, 0.0)

    def amls_factors(self):
        return self._lookup, UnitCorr().corr

    def params(self):
        return {"g0": list(self.g0)}


# ---------------------------------------------------------------------------
# module-level operations (thin wrappers over the kernel objects)

def eval_kernel(spec: Kernel, t, s):
    """k(t, s; theta); symmetric in (t, s)."""
    return spec.eval(t, s)


def amls_parts(spec: Kernel, t, s):
    """(rank-1 value, stationary value) whose product equals eval(t, s).

    Defined for the SS and DC kernels, the two families with the
    canonical amplitude/correlation split.
    """
    if not isinstance(spec, (SSKernel, DCKernel)):
        raise UnsupportedKernelError(
            f"amls_parts is not defined for family {spec.family!r}")
    b, corr = spec.amls_factors()
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    kd = b(t) * b(s)
    kc = corr(np.abs(t - s))
    if kd.ndim == 0:
        return float(kd), float(kc)
    return kd, kc


def ss_reparam_check(c, beta, grid):
    """Max |original SS form - geometric form with lam = exp(-beta/2)|.

    `grid` is an iterable of (t, s) pairs.
    """
    if beta <= 0:
        raise DomainError(f"beta={beta} violates beta > 0")
    lam = math.exp(-beta / 2)
    spec = SSKernel(c=c, lam=lam)
    worst = 0.0
    for t, s in grid:
        mx = max(t, s)
        original = (c * 0.5 * math.exp(-beta * (t + s) - beta * mx)
                    - c / 6 * math.exp(-3 * beta * mx))
        worst = max(worst, abs(original - spec.eval(t, s)))
    return worst


def gram(spec: Kernel, grid):
    """Gram matrix K[i, j] = eval(grid[i], grid[j]); exactly symmetric."""
    return spec.gram(grid)


def chol_with_jitter(K, rel_start=1e-12, rel_max=1e-6):
    """Cholesky of K + jitter*I, escalating jitter x10 until it succeeds.

    Returns (L, jitter).  Raises NumericalError carrying the last jitter
    level tried.
    """
    K = np.asarray(K, dtype=float)
    scale = max(float(np.max(np.diag(K))) if K.size else 0.0, 1.0e-300)
    jitter = rel_start * scale
    limit = rel_max * scale
    while True:
        try:
            L = np.linalg.cholesky(K + jitter * np.eye(K.shape[0]))
            return L, jitter
        except np.linalg.LinAlgError:
            if jitter >= limit:
                raise NumericalError(
                    f"Cholesky failed at max jitter {jitter:.3g}",
                    jitter=jitter)
            jitter *= 10


def sample_gp(spec: Kernel, grid, n_paths, seed):
    """Rows are independent draws from N(0, K + jitter*I) on the grid."""
    K = spec.gram(grid)
    L, _ = chol_with_jitter(K)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_paths, K.shape[0]))
    return z @ L.T


def paths_to_csv(grid, paths):
    """CSV text with header "t,path_1,...,path_n" for GP realizations."""
    n_paths = paths.shape[0]
    header = "t," + ",".join(f"path_{i + 1}" for i in range(n_paths))
    lines = [header]
    for j, t in enumerate(np.asarray(grid)):
        row = ",".join(repr(float(v)) for v in paths[:, j])
        lines.append(f"{t},{row}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# serialization

_FAMILIES = {
    "ss": lambda p: SSKernel(c=p["c"], lam=p["lam"]),
    "dc": lambda p: DCKernel(c=p["c"], lam=p["lam"], rho=p["rho"]),
    "tc": lambda p: TCKernel(c=p["c"], lam=p["lam"]),
    "amls": lambda p: AMLSKernel(envelope=envelope_from_dict(p["envelope"]),
                                 corr=corr_from_dict(p["corr"])),
    "amls2os": lambda p: AMLS2OsKernel(c=p["c"], lam=p["lam"],
                                       alpha=p["alpha"]),
    "amls2od": lambda p: AMLS2OdKernel(c=p["c"], lam=p["lam"],
                                       omega=p["omega"], rho=p["rho"]),
    "si2od": lambda p: SI2OdKernel(omega0=p["omega0"], xi=p["xi"],
                                   gamma=p["gamma"],
                                   scale=p.get("scale", 1.0)),
    "si_statespace": lambda p: SIStateSpaceKernel(
        model=statespace.StateSpaceModel.from_dict(p["model"])),
    "oracle": lambda p: OracleKernel(g0=p["g0"]),
}


def kernel_from_dict(d):
    family = d.get("family")
    if family not in _FAMILIES:
        raise DomainError(f"unknown kernel family {family!r}")
    return _FAMILIES[family](d.get("params", {}))


def kernel_to_dict(spec: Kernel):
    return spec.to_dict()
