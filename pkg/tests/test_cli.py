import json

import numpy as np
import pytest

from rsle import cli
from rsle.errors import ConvergenceError


def _run(tmp_path, name, *argv):
    out = tmp_path / name
    code = cli.main([*argv, "--out", str(out)])
    return code, out


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


class TestParsing:
    def test_complex_list(self):
        z = cli.parse_complex_list("0.3j, -0.2, 0.5@90, 1+2i")
        assert np.allclose(z, [0.3j, -0.2, 0.5j, 1 + 2j])

    def test_numeric_lists(self):
        assert cli.parse_float_list("1e-3,2.5") == [1e-3, 2.5]
        assert cli.parse_int_list("50,200,") == [50, 200]

    def test_config_file(self, tmp_path):
        f = tmp_path / "c.cfg"
        f.write_text("# comment\nn = 3\nhydro-time = 0.5  # inline\n")
        assert cli.read_config(str(f)) == {"n": "3", "hydro_time": "0.5"}
        with pytest.raises(cli.ConfigError):
            cli.read_config(str(tmp_path / "missing.cfg"))


class TestSimulate:
    ARGS = ["simulate", "--n", "3", "--beta", "4", "--horizon", "0.01", "--dt", "1e-4", "--seed", "7"]

    def test_outputs_and_manifest(self, tmp_path):
        code, out = _run(tmp_path, "a", *self.ARGS, "--mask-resolution", "17", "--svg")
        assert code == cli.EXIT_OK
        names = {e["path"] for e in _manifest(out)["files"]}
        assert names == {"driving_path.csv", "trajectory_0.csv", "trajectory_1.csv", "trajectory_2.csv",
                         "hull_mask.csv", "hull.svg"}
        for e in _manifest(out)["files"]:
            assert e["sha256"] == cli.sha256(out / e["path"])
        assert (out / "driving_path.csv").read_text().startswith("t,theta_1,theta_2,theta_3\n")

    def test_rerun_byte_identical(self, tmp_path):
        _, a = _run(tmp_path, "a", *self.ARGS)
        _, b = _run(tmp_path, "b", *self.ARGS)
        for e in _manifest(a)["files"]:
            assert (a / e["path"]).read_bytes() == (b / e["path"]).read_bytes()
        assert _manifest(a)["files"] == _manifest(b)["files"]

    def test_single_curve_kappa(self, tmp_path):
        code, out = _run(tmp_path, "k", "simulate", "--n", "1", "--kappa", "4", "--horizon", "0.01",
                         "--dt", "1e-3", "--seed", "1")
        assert code == cli.EXIT_OK
        assert _manifest(out)["config"]["beta"] == 2.0

    def test_hydro_time_conversion(self, tmp_path):
        code, out = _run(tmp_path, "h", "simulate", "--n", "4", "--beta", "4", "--hydro-time", "0.04",
                         "--dt", "1e-3", "--seed", "1")
        assert code == cli.EXIT_OK
        assert _manifest(out)["config"]["horizon"] == pytest.approx(0.01)

    def test_collision_regime_rejected(self, tmp_path, capsys):
        code, _ = _run(tmp_path, "c", "simulate", "--n", "2", "--beta", "0.5", "--horizon", "0.01",
                       "--seed", "1")
        assert code == cli.EXIT_CONFIG
        assert "beta" in capsys.readouterr().err

    @pytest.mark.parametrize("extra, field", [
        (["--dt", "-1"], "dt"),
        (["--points", "1.5"], "points"),
        (["--mask-resolution", "8"], "mask_resolution"),
        (["--init", "cluster", "--eps0", "0"], "eps0"),
    ])
    def test_validation_names_field(self, tmp_path, capsys, extra, field):
        code, _ = _run(tmp_path, "v", *self.ARGS, *extra)
        assert code == cli.EXIT_CONFIG
        assert capsys.readouterr().err.startswith(f"error: {field}:")

    def test_missing_seed(self, tmp_path, capsys):
        code, _ = _run(tmp_path, "s", "simulate", "--n", "2", "--beta", "2", "--horizon", "0.01")
        assert code == cli.EXIT_CONFIG
        assert "seed" in capsys.readouterr().err


class TestPrecedence:
    def test_flag_over_config_over_default(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n = 2\nbeta = 4\nhorizon = 0.01\nseed = 3\ndt = 1e-3\n")
        _, out = _run(tmp_path, "p", "simulate", "--config", str(cfg), "--seed", "5")
        conf = _manifest(out)["config"]
        assert conf["seed"] == 5 and conf["n"] == 2 and conf["dt"] == 1e-3
        assert conf["swallow_eps"] == 1e-4

    def test_out_dir_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("RSLE_OUT", str(tmp_path / "env"))
        code = cli.main(["hydro", "--t", "0.5", "--n-samples", "16", "--density-points", "9"])
        assert code == cli.EXIT_OK
        assert (tmp_path / "env" / "hydro.json").is_file()
        cli.main(["hydro", "--t", "0.5", "--n-samples", "16", "--density-points", "9", "--out",
                  str(tmp_path / "flag")])
        assert (tmp_path / "flag" / "hydro.json").is_file()


class TestHydro:
    def test_critical(self, tmp_path):
        code, out = _run(tmp_path, "c", "hydro", "--t", "1.0")
        assert code == cli.EXIT_OK
        info = json.loads((out / "hydro.json").read_text())
        assert info["topology"] == "Critical"
        assert info["gamma"]["endpoint_out"][0] == pytest.approx(-1.0, abs=1e-8)

    def test_edge_fits(self, tmp_path):
        _, out = _run(tmp_path, "f", "hydro", "--t", "0.5", "--fit-edges")
        fits = json.loads((out / "hydro.json").read_text())["edge_fits"]
        assert fits["gamma"]["exponent"] == pytest.approx(1.5, abs=0.1)

    def test_annulus(self, tmp_path):
        _, out = _run(tmp_path, "a", "hydro", "--t", "1.5", "--svg")
        info = json.loads((out / "hydro.json").read_text())
        assert info["topology"] == "Annulus"
        rows = np.loadtxt(out / "gamma.csv", delimiter=",", skiprows=1)
        assert np.hypot(rows[:, 1], rows[:, 2]).max() < 1
        assert (out / "hydro.svg").is_file()

    def test_invalid_time(self, tmp_path):
        code, _ = _run(tmp_path, "x", "hydro", "--t", "-1")
        assert code == cli.EXIT_CONFIG


class TestVerify:
    def test_hydro_residuals(self, tmp_path):
        code, out = _run(tmp_path, "r", "verify", "--suite", "hydro-residuals")
        assert code == cli.EXIT_OK
        rep = json.loads((out / "verify_hydro-residuals.json").read_text())
        assert rep["summary"] == "PASS" and all(c["pass"] for c in rep["checks"])

    def test_martingale_negative_control(self, tmp_path):
        args = ["verify", "--suite", "martingale", "--n", "1", "--kappa", "4", "--paths", "2000",
                "--seed", "11", "--dt", "1e-3", "--z-grid", "0.3@90,0.3@-90"]
        code, _ = _run(tmp_path, "m", *args, "--xi-offset", "0.5")
        assert code == cli.EXIT_FAIL

    def test_hadamard(self, tmp_path):
        code, _ = _run(tmp_path, "h", "verify", "--suite", "hadamard", "--paths", "5")
        assert code == cli.EXIT_OK

    def test_unknown_suite(self, tmp_path):
        code, _ = _run(tmp_path, "u", "verify", "--suite", "nope")
        assert code == cli.EXIT_CONFIG

    def test_kappa_bound(self, tmp_path):
        code, _ = _run(tmp_path, "k", "verify", "--suite", "martingale", "--kappa", "10", "--seed", "1")
        assert code == cli.EXIT_CONFIG


class TestConverge:
    def test_small_run(self, tmp_path):
        code, out = _run(tmp_path, "c", "converge", "--ns", "5,10", "--paths", "4", "--seed", "2")
        assert code == cli.EXIT_OK
        lines = (out / "converge.csv").read_text().splitlines()
        assert lines[0] == "n,stieltjes_sup_error" and len(lines) == 3


class TestExitCodes:
    def test_numerical_failure(self, tmp_path, monkeypatch):
        def boom(*a, **k):
            raise ConvergenceError("no convergence")

        monkeypatch.setattr(cli.hydro, "boundary_gamma", boom)
        code, _ = _run(tmp_path, "n", "hydro", "--t", "0.5")
        assert code == cli.EXIT_NUMERIC

    def test_argparse_error(self):
        assert cli.main(["simulate", "--n", "abc"]) == cli.EXIT_CONFIG
