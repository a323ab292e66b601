"""Simulation-induced kernels from stochastic state-space models.

A model is the quintuple (A, B, C, D, Q) plus a decay envelope b(t).  The
driven system

    z(t+1) = A z(t) + B b(t) w(t),   z(0) ~ N(0, Q)
    g(t)   = C z(t) + D b(t) w(t)

with unit-variance white Gaussian w(t) defines a zero-mean Gaussian
process whose covariance is the simulation-induced kernel.  This module
evaluates that covariance in closed form, houses the known realizations
of the DC and stable-spline kernels, the second-order damped-oscillation
closed form, a discrete Lyapunov solver, and a Monte Carlo covariance
oracle used for verification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm, solve_discrete_lyapunov

from .envelopes import ExpDecay, envelope_from_dict
from .exceptions import DomainError, NumericalError


def _frozen_array(a, shape=None):
    a = np.array(a, dtype=float)
    if shape is not None:
        a = a.reshape(shape)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateSpaceModel:
    """Quintuple (A, B, C, D, Q) plus the envelope b(t) of the uncertainty."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float
    Q: np.ndarray
    envelope: object  # DecayEnvelope (ExpDecay / ExpOsc)

    def __post_init__(self):
        n = np.atleast_2d(np.asarray(self.A, float)).shape[0]
        object.__setattr__(self, "A", _frozen_array(self.A, (n, n)))
        object.__setattr__(self, "B", _frozen_array(self.B, (n,)))
        object.__setattr__(self, "C", _frozen_array(self.C, (n,)))
        object.__setattr__(self, "D", float(self.D))
        object.__setattr__(self, "Q", _frozen_array(self.Q, (n, n)))
        if not np.allclose(self.Q, self.Q.T, atol=1e-12):
            raise DomainError("Q must be symmetric")
        if np.linalg.eigvalsh(self.Q).min() < -1e-10:
            raise DomainError("Q must be positive semidefinite "
                              "(min eigenvalue >= -1e-10)")

    @property
    def order(self):
        return self.A.shape[0]

    def b(self, t):
        return self.envelope.b(t)

    def to_dict(self):
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "C": self.C.tolist(),
            "D": self.D,
            "Q": self.Q.tolist(),
            "envelope": self.envelope.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(A=d["A"], B=d["B"], C=d["C"], D=d["D"], Q=d["Q"],
                   envelope=envelope_from_dict(d["envelope"]))


@dataclass(frozen=True)
class SecondOrderNominal:
    """Underdamped second-order nominal model with decaying uncertainty.

    The transfer function is 1 / (s**2 + 2*omega0*xi*s + omega0**2); the
    uncertainty envelope is exp(-gamma*t).  The derived quantities
    alpha = omega0*xi and beta = omega0*sqrt(1 - xi**2) parameterize the
    closed-form kernel.
    """

    omega0: float
    xi: float
    gamma: float
    alpha: float = field(init=False)
    beta: float = field(init=False)

    def __post_init__(self):
        if self.omega0 <= 0:
            raise DomainError(f"omega0={self.omega0} violates omega0 > 0")
        if not 0 <= self.xi <= 1 - 1e-3:
            raise DomainError(f"xi={self.xi} violates 0 <= xi <= 0.999")
        if self.gamma <= 0:
            raise DomainError(f"gamma={self.gamma} violates gamma > 0")
        object.__setattr__(self, "alpha", self.omega0 * self.xi)
        object.__setattr__(self, "beta",
                           self.omega0 * math.sqrt(1 - self.xi ** 2))

    def state_space(self):
        """(A, B, C, D) of the nominal model in phase-variable form."""
        a, b = self.alpha, self.beta
        A = np.array([[0.0, 1.0], [-(a * a + b * b), -2 * a]])
        B = np.array([0.0, 1.0])
        C = np.array([1.0, 0.0])
        return A, B, C, 0.0


def _impulse_coeffs(m: StateSpaceModel, kmax):
    """CA^k and CA^k B for k = 0..kmax."""
    n = m.order
    rows = np.empty((kmax + 1, n))
    v = m.C.copy()
    for k in range(kmax + 1):
        rows[k] = v
        v = v @ m.A
    return rows, rows @ m.B


def si_kernel_dt(m: StateSpaceModel, t, s):
    """Closed-form covariance of the simulated output at integer (t, s).

    The Kronecker-delta convention delta(0)=1 is used for the
    discrete-time cross terms.
    """
    t, s = int(t), int(s)
    if t < 0 or s < 0:
        raise DomainError(f"t={t}, s={s} violate t,s >= 0")
    rows, f = _impulse_coeffs(m, max(t, s))
    b = m.b(np.arange(max(t, s) + 1))
    val = float(rows[t] @ m.Q @ rows[s])
    if t == s:
        val += m.D ** 2 * b[t] ** 2
    elif t < s:
        val += m.D * b[t] ** 2 * f[s - 1 - t]
    else:
        val += m.D * b[s] ** 2 * f[t - 1 - s]
    mm = min(t, s)
    if mm > 0:
        val += float(np.dot(b[:mm] ** 2, f[t - mm:t][::-1] * f[s - mm:s][::-1]))
    return val


def si_gram(m: StateSpaceModel, grid):
    """Gram matrix of the simulation-induced kernel on an integer grid."""
    grid = np.asarray(grid, dtype=int)
    if grid.size and ((np.diff(grid) <= 0).any() or grid.min() < 0):
        raise DomainError("grid must be strictly increasing and nonnegative")
    tmax = int(grid.max()) if grid.size else 0
    rows, f = _impulse_coeffs(m, tmax)
    b = m.b(np.arange(tmax + 1))
    b2 = b ** 2
    # cumulative helper: S(t, s) = sum_{k<min(t,s)} b(k)^2 f(t-1-k) f(s-1-k)
    K = np.empty((grid.size, grid.size))
    R = rows[grid]
    K[:] = R @ m.Q @ R.T
    for i, t in enumerate(grid):
        for j, s in enumerate(grid[:i + 1]):
            mm = min(t, s)
            v = 0.0
            if mm > 0:
                v = float(np.dot(b2[:mm], f[t - mm:t][::-1] * f[s - mm:s][::-1]))
            if t == s:
                v += m.D ** 2 * b[t] ** 2
            else:
                lo, hi = (t, s) if t < s else (s, t)
                v += m.D * b[lo] ** 2 * f[hi - 1 - lo]
            K[i, j] += v
            K[j, i] = K[i, j]
    return K


def realize_dc_dt(c, lam, rho):
    """First-order state-space realization of the DC kernel."""
    if c < 0:
        raise DomainError(f"c={c} violates c >= 0")
    if not 0 <= lam < 1:
        raise DomainError(f"lam={lam} violates 0 <= lam < 1")
    if abs(rho) >= 1:
        raise DomainError(f"rho={rho} violates |rho| < 1 "
                          "(|rho| = 1 degenerates Q)")
    return StateSpaceModel(
        A=[[math.sqrt(lam) * rho]],
        B=[math.sqrt(lam)],
        C=[rho * math.sqrt(1 - rho ** 2)],
        D=math.sqrt(1 - rho ** 2),
        Q=[[c / (1 - rho ** 2)]],
        envelope=ExpDecay(c=c, lam=math.sqrt(lam)),
    )


def realize_ss_dt(c, lam):
    """Second-order state-space realization of the stable-spline kernel."""
    if c < 0:
        raise DomainError(f"c={c} violates c >= 0")
    if not 0 <= lam < 1:
        raise DomainError(f"lam={lam} violates 0 <= lam < 1")
    if lam == 0 or c == 0:
        # degenerate: identically zero kernel
        return StateSpaceModel(A=np.zeros((2, 2)), B=np.zeros(2),
                               C=np.zeros(2), D=0.0, Q=np.zeros((2, 2)),
                               envelope=ExpDecay(c=0.0, lam=0.0))
    root = math.sqrt(1 + lam ** 2 + lam ** 4)
    abar = math.sqrt(1 + lam ** 2 - root)
    bbar = math.sqrt(1 + lam ** 2 + root)
    scale = math.sqrt((1 - lam ** 2) ** 3 / 2)
    A = lam ** 3 * np.diag([lam, lam ** 3])
    B = np.array([lam ** 3, lam ** 3])
    C = scale * np.array([(abar + bbar * lam) / (1 - lam ** 2),
                          -lam ** 2 * (abar + bbar * lam ** 3) / (1 - lam ** 2)])
    D = bbar * scale
    Q = (c / 3) * np.array([[1 / (1 - lam ** 2), 1 / (1 - lam ** 4)],
                            [1 / (1 - lam ** 4), 1 / (1 - lam ** 6)]])
    return StateSpaceModel(A=A, B=B, C=C, D=D, Q=Q,
                           envelope=ExpDecay(c=c / 3, lam=lam ** 3))


def realize_controllable_canonical(bbar, a_coeffs, Q, envelope):
    """Model whose nominal part is q**(n-1)*bbar / (q**n + a1 q**(n-1) + ...).

    Written in controllable canonical form; the resulting kernel has an
    n-band inverse Gram matrix on any grid.
    """
    a = np.asarray(a_coeffs, dtype=float)
    n = a.size
    A = np.zeros((n, n))
    A[0, :] = -a
    if n > 1:
        A[1:, :-1] = np.eye(n - 1)
    B = np.zeros(n)
    B[0] = 1.0
    C = np.zeros(n)
    C[0] = float(bbar)
    return StateSpaceModel(A=A, B=B, C=C, D=0.0, Q=Q, envelope=envelope)


def si2od_closed(p: SecondOrderNominal, t, s):
    """Closed-form second-order damped-oscillation kernel on t, s >= 0.

    Evaluates the continuous-time simulation-induced covariance of the
    underdamped nominal model with Q = I2 and envelope exp(-gamma*t).
    The alpha == gamma case is handled by the removable-singularity
    limit.  Broadcasts over array arguments.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t < 0) or np.any(s < 0):
        raise DomainError("t, s must be >= 0")
    al, be, gam = p.alpha, p.beta, p.gamma
    m = np.minimum(t, s)
    ets = np.exp(-al * (t + s))
    out = ets * (np.cos(be * t) * np.cos(be * s)
                 + (al / be) * np.sin(be * (t + s))
                 + ((al * al + 1) / be ** 2) * np.sin(be * t) * np.sin(be * s))
    a = 2 * (al - gam)
    if abs(al - gam) < 1e-9:
        growth = 2 * m
    else:
        growth = (np.exp(a * m) - 1.0) / (al - gam)
    out = out + ets * np.cos(be * (t - s)) * growth / (4 * be ** 2)
    R = math.sqrt(4 * be ** 2 + 4 * (al - gam) ** 2)
    phi = math.acos(2 * (al - gam) / R)
    out = out + ets / (2 * be ** 2 * R) * (
        np.cos(phi + be * (t + s))
        - np.exp(a * m) * np.cos(2 * be * m - phi - be * (t + s)))
    return out if out.ndim else float(out)


def si_kernel_ct_quadrature(A, B, C, Q, b, t, s, tol=1e-9):
    """Continuous-time simulation-induced kernel via adaptive quadrature.

    Verification oracle: k(t,s) = C e^{At} Q e^{As}' C' +
    integral_0^min(t,s) b(tau)^2 h(t-tau) h(s-tau) dtau with
    h(x) = C e^{Ax} B.  `b` is a callable on scalars.
    """
    A = np.atleast_2d(np.asarray(A, float))
    B = np.asarray(B, float).reshape(-1)
    C = np.asarray(C, float).reshape(-1)
    Q = np.atleast_2d(np.asarray(Q, float))
    first = float(C @ expm(A * t) @ Q @ expm(A * s).T @ C)

    def h(x):
        return float(C @ expm(A * x) @ B)

    def integrand(tau):
        return b(tau) ** 2 * h(t - tau) * h(s - tau)

    mm = min(t, s)
    if mm <= 0:
        return first
    val, _ = quad(integrand, 0.0, mm, epsabs=tol, epsrel=tol, limit=400)
    return first + val


def lyapunov_dt(A, B):
    """Solve Q = A Q A' + B B' for a stable A (spectral radius < 1)."""
    A = np.atleast_2d(np.asarray(A, float))
    B = np.asarray(B, float)
    if B.ndim == 1:
        B = B[:, None]
    radius = np.abs(np.linalg.eigvals(A)).max()
    if radius >= 1.0:
        raise NumericalError(
            f"no solution: spectral radius {radius:.6g} >= 1")
    BBt = B @ B.T
    Q = solve_discrete_lyapunov(A, BBt)
    resid = np.linalg.norm(Q - A @ Q @ A.T - BBt)
    scale = max(np.linalg.norm(BBt), 1e-300)
    if resid > 1e-10 * scale:
        raise NumericalError(
            f"Lyapunov residual {resid:.3g} exceeds 1e-10 * ||BB'||")
    return Q


def simulate_covariance(m: StateSpaceModel, horizon, n_paths, seed,
                        return_stderr=False):
    """Empirical covariance of simulated output paths on t = 0..horizon-1.

    Simulates z(t+1) = A z(t) + B b(t) w(t), g(t) = C z(t) + D b(t) w(t)
    with z(0) ~ N(0, Q); returns the raw second-moment matrix of g (the
    process has zero mean).  Deterministic given the seed.
    """
    if n_paths < 2:
        raise DomainError(f"n_paths={n_paths} violates n_paths >= 2")
    rng = np.random.default_rng(seed)
    n = m.order
    # sample z(0) through a symmetric PSD square root (Q may be singular)
    w, V = np.linalg.eigh(m.Q)
    root = V * np.sqrt(np.clip(w, 0.0, None))
    z = rng.standard_normal((n_paths, n)) @ root.T
    b = m.b(np.arange(horizon))
    G = np.empty((n_paths, horizon))
    for t in range(horizon):
        wt = rng.standard_normal(n_paths)
        G[:, t] = z @ m.C + m.D * b[t] * wt
        z = z @ m.A.T + np.outer(wt, m.B) * b[t]
    cov = G.T @ G / n_paths
    if not return_stderr:
        return cov
    # per-entry standard error of the raw moment estimate
    prods = G[:, :, None] * G[:, None, :]
    stderr = prods.std(axis=0, ddof=1) / math.sqrt(n_paths)
    return cov, stderr
