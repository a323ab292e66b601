import hashlib
import json

import numpy as np
import pytest

from kernelreg import analysis, benchmark, cli
from kernelreg.estimator import DataSet


def run_cli(*argv):
    return cli.main(list(argv))


def write_kernel(tmp_path, d, name="kernel.json"):
    path = tmp_path / name
    path.write_text(json.dumps(d))
    return str(path)


class TestSample:
    def test_negative_rho_sign_flips(self, tmp_path):
        code = run_cli("sample", "--family", "dc",
                       "--params", "c=1,lam=0.9,rho=-0.99",
                       "--grid", "1:200", "--paths", "3",
                       "--seed", "0", "--out", str(tmp_path))
        assert code == 0
        rows = (tmp_path / "paths.csv").read_text().strip().splitlines()[1:]
        paths = np.array([[float(v) for v in r.split(",")[1:]] for r in rows])
        flips = np.mean(np.sign(paths[1:]) != np.sign(paths[:-1]))
        assert flips > 0.9

    def test_oracle_paths_proportional(self, tmp_path):
        spec = write_kernel(tmp_path, {"family": "oracle",
                                       "params": {"g0": [1.0, 0.5, 0.25]}})
        code = run_cli("sample", "--kernel", spec, "--grid", "1:3",
                       "--paths", "4", "--seed", "1", "--out", str(tmp_path))
        assert code == 0
        rows = (tmp_path / "paths.csv").read_text().strip().splitlines()[1:]
        paths = np.array([[float(v) for v in r.split(",")[1:]] for r in rows])
        base = np.array([1.0, 0.5, 0.25])
        for j in range(paths.shape[1]):
            zeta = paths[0, j] / base[0]
            assert np.allclose(paths[:, j], zeta * base, atol=1e-3)

    def test_stable_hash(self, tmp_path):
        args = ("sample", "--family", "tc", "--params", "c=1,lam=0.8",
                "--grid", "1:20", "--paths", "2", "--seed", "7")
        run_cli(*args, "--out", str(tmp_path / "a"))
        run_cli(*args, "--out", str(tmp_path / "b"))
        ha = hashlib.sha256((tmp_path / "a" / "paths.csv").read_bytes())
        hb = hashlib.sha256((tmp_path / "b" / "paths.csv").read_bytes())
        assert ha.hexdigest() == hb.hexdigest()

    def test_env_seed(self, tmp_path, monkeypatch):
        monkeypatch.setenv("KERNELREG_SEED", "7")
        run_cli("sample", "--family", "tc", "--params", "c=1,lam=0.8",
                "--grid", "1:20", "--paths", "2", "--out",
                str(tmp_path / "env"))
        monkeypatch.delenv("KERNELREG_SEED")
        run_cli("sample", "--family", "tc", "--params", "c=1,lam=0.8",
                "--grid", "1:20", "--paths", "2", "--seed", "7",
                "--out", str(tmp_path / "flag"))
        assert (tmp_path / "env" / "paths.csv").read_bytes() == \
            (tmp_path / "flag" / "paths.csv").read_bytes()

    def test_missing_kernel_is_usage_error(self, tmp_path):
        assert run_cli("sample", "--out", str(tmp_path)) == 2

    def test_bad_params_is_usage_error(self, tmp_path):
        assert run_cli("sample", "--family", "dc", "--params", "oops",
                       "--out", str(tmp_path)) == 2


class TestEval:
    def test_writes_gram(self, tmp_path):
        code = run_cli("eval", "--family", "dc",
                       "--params", "c=1,lam=0.81,rho=0.5",
                       "--grid", "0:1", "--out", str(tmp_path))
        assert code == 0
        lines = (tmp_path / "gram.csv").read_text().strip().splitlines()
        assert lines[0] == "t,0,1"
        row0 = [float(v) for v in lines[1].split(",")[1:]]
        assert row0 == pytest.approx([1.0, 0.45])


class TestEstimate:
    def test_missing_file(self, tmp_path):
        assert run_cli("estimate", "--data", str(tmp_path / "nope.csv"),
                       "--out", str(tmp_path)) == 2

    def test_zero_output(self, tmp_path):
        data = DataSet(u=np.random.default_rng(0).standard_normal(40),
                       y=np.zeros(40))
        (tmp_path / "data.csv").write_text(data.to_csv())
        code = run_cli("estimate", "--data", str(tmp_path / "data.csv"),
                       "--family", "tc", "--taps", "10",
                       "--out", str(tmp_path))
        assert code == 0
        result = json.loads((tmp_path / "estimate.json").read_text())
        assert max(abs(v) for v in result["g_hat"]) <= 1e-6
        assert result["fit"] is None

    def test_synthetic_with_sidecar(self, tmp_path):
        system = benchmark.gen_system(3)
        data = benchmark.gen_dataset(system, 4)
        (tmp_path / "data.csv").write_text(data.to_csv())
        g0_lines = ["tau,g0"] + [f"{i},{float(v)!r}"
                                 for i, v in enumerate(data.g0, start=1)]
        (tmp_path / "g0.csv").write_text("\n".join(g0_lines) + "\n")
        code = run_cli("estimate", "--data", str(tmp_path / "data.csv"),
                       "--family", "tc", "--out", str(tmp_path))
        assert code == 0
        result = json.loads((tmp_path / "estimate.json").read_text())
        assert result["fit"] is not None
        assert result["fit"] > 20


class TestVerify:
    def test_default_passes(self, tmp_path, capsys):
        assert run_cli("verify", "--seed", "0",
                       "--out", str(tmp_path)) == 0
        report = json.loads((tmp_path / "verify.json").read_text())
        assert report["all_pass"] is True
        assert all("metric" in c for c in report["checks"])
        out = capsys.readouterr().out
        assert "PASS realization_equivalence_dc" in out

    def test_injected_fault_fails(self, tmp_path):
        assert run_cli("verify", "--seed", "0", "--inject-fault",
                       "--out", str(tmp_path)) == 1
        report = json.loads((tmp_path / "verify.json").read_text())
        by_name = {c["check_name"]: c for c in report["checks"]}
        assert by_name["realization_equivalence_dc"]["pass"] is False


class TestInspect:
    def test_example2_bandwidth(self, tmp_path, capsys):
        model = analysis._example2_model()
        spec = write_kernel(tmp_path, {"family": "si_statespace",
                                       "params": {"model": model.to_dict()}})
        code = run_cli("inspect", "--kernel", spec, "--grid", "1:10",
                       "--out", str(tmp_path))
        assert code == 0
        assert "measured bandwidth of K^-1" in capsys.readouterr().out
        assert (tmp_path / "gram.csv").is_file()
        assert (tmp_path / "gram_inverse.csv").is_file()
        out = (tmp_path / "gram_inverse.csv").read_text()
        assert len(out.strip().splitlines()) == 11

    def test_dc_bandwidth_one(self, tmp_path, capsys):
        code = run_cli("inspect", "--family", "dc",
                       "--params", "c=1,lam=0.9,rho=0.5",
                       "--grid", "1:10", "--out", str(tmp_path))
        assert code == 0
        assert "bandwidth of K^-1 at tol=1e-08: 1" in capsys.readouterr().out

    def test_oracle_jitter_caveat(self, tmp_path, capsys):
        spec = write_kernel(tmp_path, {"family": "oracle",
                                       "params": {"g0": [1.0, 0.5, 0.25,
                                                         0.125]}})
        code = run_cli("inspect", "--kernel", spec, "--grid", "1:4",
                       "--out", str(tmp_path))
        assert code == 0
        assert "jitter" in capsys.readouterr().out

    def test_grid_cap(self, tmp_path):
        assert run_cli("inspect", "--family", "tc", "--params", "c=1,lam=0.5",
                       "--grid", "1:300", "--out", str(tmp_path)) == 2


class TestBench:
    def test_small_run(self, tmp_path):
        code = run_cli("bench", "--systems", "1", "--families", "oracle",
                       "--seed", "0", "--jobs", "1", "--out", str(tmp_path))
        assert code == 0
        for name in ("trials.csv", "summary.json", "boxplot.csv"):
            assert (tmp_path / name).is_file()
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["families"]["oracle"]["n_trials"] == 1
