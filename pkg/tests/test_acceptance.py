"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal
summary (see conftest.py) and asserts the criterion at its stated
tolerance and runtime budget.  The full-scale benchmark (criterion 8)
is an optional long run, enabled with KERNELREG_FULL_SCALE=1.
"""

import math
import os
import time

import numpy as np
import pytest

from kernelreg import analysis, benchmark, statespace
from kernelreg.analysis import (banded_inverse_check, maxent_dc_variance,
                                measured_bandwidth, si_stability_check,
                                stability_partial_sums)
from kernelreg.envelopes import ExpDecay
from kernelreg.estimator import DataSet, estimate_impulse, regressor_matrix
from kernelreg.kernels import (AMLS2OdKernel, AMLS2OsKernel, AMLSKernel,
                               DCKernel, SSKernel, TCKernel)
from kernelreg.statespace import (SecondOrderNominal, realize_dc_dt,
                                  realize_ss_dt, si2od_closed, si_gram,
                                  si_kernel_ct_quadrature, simulate_covariance)
from kernelreg.stationary import DCCorr


def check(acceptance, number, description, ok, detail="", budget=None,
          elapsed=None):
    if budget is not None and elapsed is not None:
        detail = (detail + f"; {elapsed:.1f}s of {budget:.0f}s").lstrip("; ")
        ok = ok and elapsed < budget
    acceptance(number, description, "PASS" if ok else "FAIL", detail)
    assert ok, f"criterion {number} failed: {description} [{detail}]"


def test_criterion_1_realization_equivalence(acceptance):
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    grid = np.arange(0, 51)
    worst = 0.0
    for _ in range(20):
        c = rng.uniform(0.2, 3.0)
        lam = rng.uniform(0.05, 0.95)
        rho = rng.uniform(-0.95, 0.95)
        K_dc = DCKernel(c=c, lam=lam, rho=rho).gram(grid)
        worst = max(worst, float(np.abs(
            K_dc - si_gram(realize_dc_dt(c, lam, rho), grid)).max()))
        K_ss = SSKernel(c=c, lam=lam).gram(grid)
        worst = max(worst, float(np.abs(
            K_ss - si_gram(realize_ss_dt(c, lam), grid)).max()))
    elapsed = time.perf_counter() - start
    check(acceptance, 1, "realization equivalence (DC and SS, 20 draws)",
          worst <= 1e-9, f"max abs dev {worst:.2e} <= 1e-9",
          budget=5.0, elapsed=elapsed)


def test_criterion_2_banded_inverse(acceptance):
    start = time.perf_counter()
    grid = np.arange(1, 11)
    K_dc = DCKernel(c=1.0, lam=0.9, rho=0.5).gram(grid)
    rep = banded_inverse_check(K_dc, 1, tol=1e-8)
    K2 = si_gram(analysis._example2_model(), grid)
    bw = measured_bandwidth(K2, tol=1e-8)
    elapsed = time.perf_counter() - start
    ok = rep.passed and bw == 2
    check(acceptance, 2, "banded inverses (DC 1-band, Example 2 bandwidth 2)",
          ok, f"DC off-band {rep.max_offband / rep.scale:.2e}, "
              f"Example 2 bandwidth {bw}", budget=1.0, elapsed=elapsed)


def test_criterion_3_maxent_variance(acceptance):
    start = time.perf_counter()
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(50):
        worst = max(worst, maxent_dc_variance(rng.uniform(0.2, 3.0),
                                              rng.uniform(0.05, 0.99),
                                              rng.uniform(-0.99, 0.99), 30))
    elapsed = time.perf_counter() - start
    check(acceptance, 3, "max-entropy variance identity (50 DC draws)",
          worst <= 1e-12, f"max dev {worst:.2e} <= 1e-12",
          budget=1.0, elapsed=elapsed)


def test_criterion_4_si2od_vs_quadrature(acceptance):
    start = time.perf_counter()
    worst = 0.0
    for omega0, xi, gamma in [(1.0, 0.3, 0.5), (2.0, 0.1, 0.2),
                              (1.0, 0.7, 0.7 + 1e-10)]:
        p = SecondOrderNominal(omega0=omega0, xi=xi, gamma=gamma)
        A, B, C, _ = p.state_space()
        for t in range(11):
            for s in range(11):
                ref = si_kernel_ct_quadrature(
                    A, B, C, np.eye(2),
                    lambda tau: math.exp(-gamma * tau), t, s)
                val = si2od_closed(p, t, s)
                # floor the denominator at the quadrature tolerance so
                # zero crossings of the oscillatory kernel stay finite
                worst = max(worst, abs(val - ref) / max(abs(ref), 1e-9))
    elapsed = time.perf_counter() - start
    check(acceptance, 4, "SI-2Od closed form vs quadrature (3 param sets)",
          worst < 1e-6, f"max rel err {worst:.2e} < 1e-6",
          budget=30.0, elapsed=elapsed)


def test_criterion_5_monte_carlo_covariance(acceptance):
    start = time.perf_counter()
    m = realize_dc_dt(1.0, 0.85, 0.4)
    horizon = 10
    cov, se = simulate_covariance(m, horizon, 200_000, 105,
                                  return_stderr=True)
    K = si_gram(m, np.arange(horizon))
    dev = np.abs(cov - K) / np.maximum(se, 1e-300)
    worst = float(dev.max())
    elapsed = time.perf_counter() - start
    check(acceptance, 5, "Monte Carlo covariance oracle (2e5 paths)",
          worst <= 4.0, f"max |dev|/SE {worst:.2f} <= 4",
          budget=60.0, elapsed=elapsed)


def test_criterion_6_stability_suite(acceptance):
    start = time.perf_counter()
    t_max = 10_000
    stable = {
        "ss": SSKernel(c=1.0, lam=math.sqrt(0.9)),
        "dc": DCKernel(c=1.0, lam=0.9, rho=0.5),
        "tc": TCKernel(c=1.0, lam=0.9),
        "amls2os": AMLS2OsKernel(c=1.0, lam=0.9, alpha=0.2 * math.pi),
        "amls2od": AMLS2OdKernel(c=1.0, lam=math.sqrt(0.9),
                                 omega=0.2 * math.pi, rho=0.5),
    }
    verdicts = {name: stability_partial_sums(spec, t_max).verdict
                for name, spec in stable.items()}
    bare = AMLSKernel(envelope=ExpDecay(c=1.0, lam=analysis.LAM_CONST_ONE),
                      corr=DCCorr(rho=0.5))
    verdicts["bare"] = stability_partial_sums(bare, t_max).verdict
    ss_ok = si_stability_check(realize_ss_dt(1.0, math.sqrt(0.9)))
    dc_ok = si_stability_check(realize_dc_dt(1.0, 0.9, 0.5))
    elapsed = time.perf_counter() - start
    ok = (all(verdicts[n] == "converging" for n in stable)
          and verdicts["bare"] == "diverging"
          and ss_ok == "satisfied" and dc_ok == "violated")
    check(acceptance, 6, "stability suite at T_max=1e4 + decay condition",
          ok, f"verdicts {verdicts}, SS {ss_ok.status}, DC {dc_ok.status}",
          budget=10.0, elapsed=elapsed)


def test_criterion_7_benchmark_desk_scale(acceptance):
    start = time.perf_counter()
    jobs = min(8, os.cpu_count() or 1)
    _, summary = benchmark.run_suite(50, ["tc", "si2od", "oracle"],
                                     seed=0, jobs=jobs)
    means = {f: summary["families"][f]["mean_fit"]
             for f in ("tc", "si2od", "oracle")}
    elapsed = time.perf_counter() - start
    ok = (means["si2od"] >= means["tc"] + 2.0
          and means["oracle"] > means["si2od"]
          and means["oracle"] > means["tc"])
    check(acceptance, 7, "desk-scale benchmark (50 systems)", ok,
          "mean fits " + ", ".join(f"{k}={v:.1f}" for k, v in means.items()),
          budget=900.0, elapsed=elapsed)


@pytest.mark.slow
def test_criterion_8_benchmark_full_scale(acceptance):
    if os.environ.get("KERNELREG_FULL_SCALE") != "1":
        acceptance(8, "full-scale benchmark (200 systems, optional)",
                   "SKIP", "set KERNELREG_FULL_SCALE=1 to run")
        pytest.skip("optional long run; set KERNELREG_FULL_SCALE=1")
    start = time.perf_counter()
    jobs = min(8, os.cpu_count() or 1)
    families = ["tc", "dc", "amls2os", "amls2od", "si2od"]
    targets = {"tc": 47.5, "dc": 50.0, "amls2os": 48.4, "amls2od": 49.7,
               "si2od": 53.3}
    _, summary = benchmark.run_suite(200, families, seed=0, jobs=jobs)
    means = {f: summary["families"][f]["mean_fit"] for f in families}
    within = all(abs(means[f] - targets[f]) <= 5.0 for f in families)
    ranked = means["si2od"] > means["tc"]
    elapsed = time.perf_counter() - start
    check(acceptance, 8, "full-scale benchmark (200 systems)",
          within and ranked,
          "mean fits " + ", ".join(f"{k}={v:.1f}" for k, v in means.items()),
          elapsed=elapsed)


def test_criterion_9_estimator_oracle_equivalence(acceptance):
    start = time.perf_counter()
    rng = np.random.default_rng(109)
    n = 10
    worst_qp = 0.0
    for _ in range(20):
        u = rng.standard_normal(40)
        y = rng.standard_normal(40)
        data = DataSet(u=u, y=y)
        spec = DCKernel(c=rng.uniform(0.5, 2.0), lam=rng.uniform(0.5, 0.9),
                        rho=rng.uniform(-0.5, 0.5))
        s2 = rng.uniform(0.05, 1.0)
        phi = regressor_matrix(u, n)
        K = spec.gram(np.arange(1, n + 1))
        g_qp = np.linalg.solve(phi.T @ phi + s2 * np.linalg.inv(K),
                               phi.T @ y)
        g = estimate_impulse(spec, s2, data, n)
        worst_qp = max(worst_qp,
                       float(np.linalg.norm(g - g_qp)
                             / np.linalg.norm(g_qp)))
    # linearity property suite
    worst_lin = 0.0
    spec = TCKernel(c=1.0, lam=0.8)
    for _ in range(500):
        u = rng.standard_normal(25)
        y1 = rng.standard_normal(25)
        y2 = rng.standard_normal(25)
        a, b = rng.uniform(-2, 2, size=2)
        g1 = estimate_impulse(spec, 0.3, DataSet(u=u, y=y1), 6)
        g2 = estimate_impulse(spec, 0.3, DataSet(u=u, y=y2), 6)
        g12 = estimate_impulse(spec, 0.3, DataSet(u=u, y=a * y1 + b * y2), 6)
        scale = max(np.linalg.norm(g12), 1e-12)
        worst_lin = max(worst_lin,
                        float(np.linalg.norm(g12 - a * g1 - b * g2) / scale))
    # shrinkage monotonicity property suite
    shrink_ok = True
    sigma_grid = np.logspace(-4, 4, 9)
    for _ in range(500):
        u = rng.standard_normal(25)
        y = rng.standard_normal(25)
        data = DataSet(u=u, y=y)
        norms = [np.linalg.norm(estimate_impulse(spec, s2, data, 6))
                 for s2 in sigma_grid]
        if not np.all(np.diff(norms) <= 1e-10 * max(norms)):
            shrink_ok = False
            break
    elapsed = time.perf_counter() - start
    ok = worst_qp <= 1e-6 and worst_lin <= 1e-10 and shrink_ok
    check(acceptance, 9, "estimator QP equivalence + property suites", ok,
          f"QP rel err {worst_qp:.2e}, linearity {worst_lin:.2e}, "
          f"shrinkage {'ok' if shrink_ok else 'violated'}",
          budget=30.0, elapsed=elapsed)
