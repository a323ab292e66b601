"""Command-line interface: sample, eval, estimate, verify, inspect, bench.

Exit codes: 0 success, 1 verification failure, 2 usage/config error,
3 numerical error.  The default seed is 0; the KERNELREG_SEED environment
variable overrides it when --seed is absent.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, benchmark, kernels
from .estimator import DataSet, TuneConfig, estimate
from .exceptions import (DomainError, NumericalError, TuningError,
                         UndefinedFitError)

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

DEFAULT_SEED = 0


class UsageError(Exception):
    pass


def _resolve_seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("KERNELREG_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"KERNELREG_SEED={env!r} is not an integer")
    return DEFAULT_SEED


def _parse_params(text):
    params = {}
    if not text:
        return params
    for item in text.split(","):
        if "=" not in item:
            raise UsageError(f"bad --params entry {item!r}; expected k=v")
        key, val = item.split("=", 1)
        try:
            params[key.strip()] = float(val)
        except ValueError:
            raise UsageError(f"bad --params value {val!r} for {key!r}")
    return params


def _load_spec(args):
    if getattr(args, "kernel", None):
        path = Path(args.kernel)
        if not path.is_file():
            raise UsageError(f"kernel spec file not found: {path}")
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"invalid kernel spec JSON: {exc}")
        return kernels.kernel_from_dict(d)
    if getattr(args, "family", None):
        return kernels.kernel_from_dict({"family": args.family,
                                         "params": _parse_params(args.params)})
    raise UsageError("provide --kernel FILE or --family NAME [--params ...]")


def _parse_grid(text):
    try:
        a, b = text.split(":")
        a, b = int(a), int(b)
    except ValueError:
        raise UsageError(f"bad --grid {text!r}; expected a:b")
    if b < a:
        raise UsageError(f"empty grid {text!r}")
    return np.arange(a, b + 1)


def _parse_tols(items):
    tols = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"bad --tol entry {item!r}; expected NAME=VALUE")
        name, val = item.split("=", 1)
        try:
            tols[name.strip()] = float(val)
        except ValueError:
            raise UsageError(f"bad --tol value {val!r}")
    return tols


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _matrix_csv(grid, M):
    header = "t," + ",".join(str(int(t)) for t in grid)
    lines = [header]
    for t, row in zip(grid, M):
        lines.append(f"{int(t)}," + ",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def cmd_sample(args):
    spec = _load_spec(args)
    seed = _resolve_seed(args)
    grid = _parse_grid(args.grid)
    paths = kernels.sample_gp(spec, grid, args.paths, seed)
    out = _out_dir(args)
    (out / "paths.csv").write_text(kernels.paths_to_csv(grid, paths))
    print(f"wrote {out / 'paths.csv'}: {args.paths} paths on "
          f"t={grid[0]}..{grid[-1]}, seed={seed}")
    print(f"sample mean {float(paths.mean()):.6g}, "
          f"sample std {float(paths.std()):.6g}")
    return EXIT_OK


def cmd_eval(args):
    spec = _load_spec(args)
    grid = _parse_grid(args.grid)
    K = spec.gram(grid)
    out = _out_dir(args)
    (out / "gram.csv").write_text(_matrix_csv(grid, K))
    print(f"wrote {out / 'gram.csv'}: {K.shape[0]}x{K.shape[1]} Gram matrix")
    print(f"k(t0,t0)={K[0, 0]!r}, max={float(K.max())!r}, "
          f"trace={float(np.trace(K))!r}")
    return EXIT_OK


def cmd_estimate(args):
    data_path = Path(args.data)
    if not data_path.is_file():
        raise UsageError(f"data file not found: {data_path}")
    g0_text = None
    if args.g0:
        g0_path = Path(args.g0)
        if not g0_path.is_file():
            raise UsageError(f"g0 file not found: {g0_path}")
        g0_text = g0_path.read_text()
    else:
        sidecar = data_path.parent / "g0.csv"
        if sidecar.is_file():
            g0_text = sidecar.read_text()
    data = DataSet.from_csv(data_path.read_text(), g0_text=g0_text)
    seed = _resolve_seed(args)
    result = estimate(args.family, data, n=args.taps,
                      cfg=TuneConfig(seed=seed))
    out = _out_dir(args)
    payload = result.to_dict()
    payload["seed"] = seed
    (out / "estimate.json").write_text(json.dumps(payload, indent=2) + "\n")
    fit_msg = "" if result.fit is None else f", fit={result.fit:.2f}"
    print(f"wrote {out / 'estimate.json'}: family={args.family}, "
          f"nll={result.nll:.6g}, sigma2={result.sigma2:.6g}{fit_msg}")
    return EXIT_OK


def cmd_verify(args):
    seed = _resolve_seed(args)
    reports = analysis.run_verification(seed=seed,
                                        inject_fault=args.inject_fault)
    all_pass = all(r["pass"] for r in reports)
    payload = {"seed": seed, "inject_fault": args.inject_fault,
               "all_pass": all_pass, "checks": reports}
    text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        out = _out_dir(args)
        (out / "verify.json").write_text(text)
        print(f"wrote {out / 'verify.json'}")
    for r in reports:
        mark = "PASS" if r["pass"] else "FAIL"
        print(f"{mark} {r['check_name']} metric={r['metric']:.3g}")
    print(f"{'all checks passed' if all_pass else 'some checks FAILED'}")
    return EXIT_OK if all_pass else EXIT_VERIFY_FAIL


def cmd_inspect(args):
    spec = _load_spec(args)
    grid = _parse_grid(args.grid)
    if grid.size > 200:
        raise UsageError(f"grid size {grid.size} exceeds the inspect "
                         "limit of 200")
    tols = _parse_tols(args.tol)
    band_tol = tols.get("band", 1e-8)
    K = spec.gram(grid)
    jitter = 0.0
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        L, jitter = kernels.chol_with_jitter(K)
    Linv = np.linalg.solve(L, np.eye(K.shape[0]))
    Kinv = Linv.T @ Linv
    out = _out_dir(args)
    (out / "gram.csv").write_text(_matrix_csv(grid, K))
    (out / "gram_inverse.csv").write_text(_matrix_csv(grid, Kinv))
    bw = analysis.measured_bandwidth(K, tol=band_tol)
    print(f"wrote {out / 'gram.csv'} and {out / 'gram_inverse.csv'}")
    if jitter:
        print(f"note: Gram matrix is singular; inverse regularized with "
              f"jitter {jitter:.3g} and reported structure may be dense")
    print(f"measured bandwidth of K^-1 at tol={band_tol:g}: {bw}")
    return EXIT_OK


def cmd_bench(args):
    seed = _resolve_seed(args)
    families = [f.strip() for f in args.families.split(",") if f.strip()]
    if not families:
        raise UsageError("no families given")
    records, summary = benchmark.run_suite(args.systems, families,
                                           seed=seed, jobs=args.jobs)
    out = _out_dir(args)
    (out / "trials.csv").write_text(benchmark.trials_to_csv(records))
    (out / "summary.json").write_text(benchmark.summary_to_json(summary))
    (out / "boxplot.csv").write_text(benchmark.boxplot_to_csv(summary))
    print(f"wrote trials.csv, summary.json, boxplot.csv to {out}")
    for fam in families:
        info = summary["families"][fam]
        mean = info["mean_fit"]
        mean_msg = "n/a" if mean is None else f"{mean:.1f}"
        print(f"{fam}: mean fit {mean_msg} over {info['n_trials']} trials "
              f"({info['n_failed']} failed)")
    return EXIT_OK


def _add_kernel_flags(p):
    p.add_argument("--kernel", help="kernel spec JSON file")
    p.add_argument("--family", help="kernel family id")
    p.add_argument("--params", help="inline params k=v,...", default="")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kernelreg",
        description="Kernel-regularized impulse-response estimation tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw GP realizations from a kernel")
    _add_kernel_flags(p)
    p.add_argument("--grid", default="1:50")
    p.add_argument("--paths", type=int, default=5)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="evaluate a kernel Gram matrix")
    _add_kernel_flags(p)
    p.add_argument("--grid", default="1:50")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("estimate", help="estimate an impulse response")
    p.add_argument("--data", required=True, help="CSV with header t,u,y")
    p.add_argument("--g0", help="optional true-response CSV (tau,g0)")
    p.add_argument("--family", default="tc")
    p.add_argument("--taps", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("verify", help="run the structural verification suite")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--inject-fault", action="store_true",
                   help="perturb a realization to prove check sensitivity")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("inspect", help="emit K and K^-1 with bandwidth")
    _add_kernel_flags(p)
    p.add_argument("--grid", default="1:10")
    p.add_argument("--tol", action="append",
                   help="tolerance override NAME=VALUE (e.g. band=1e-8)")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("bench", help="run the Monte Carlo benchmark")
    p.add_argument("--systems", type=int, default=50)
    p.add_argument("--families",
                   default="tc,dc,amls2os,amls2od,si2od,oracle")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, TuningError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except UndefinedFitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
