import json

import pytest
from click.testing import CliRunner

import levy_burgers.cli as cli_mod
import levy_burgers.solver as solver
from levy_burgers import __version__
from levy_burgers.cli import cli, main
from levy_burgers.experiment import EnsembleFailure

TINY = """
[solver]
max_mode = 32
[averaging]
sigma = 0.5
sample_stride = 20
ensemble_size = 2
[statistics]
l_values = [0.02, 0.05, 0.1, 0.2, 0.3]
spectrum_range = "2:8"
inertial_range = "1nu:0.3"
[sweep]
nu = [0.04, 0.02, 0.01]
"""


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def tiny(tmp_path):
    p = tmp_path / "tiny.toml"
    p.write_text(TINY)
    return p


class TestSimulate:
    def test_success(self, runner, tiny, tmp_path):
        out = tmp_path / "out"
        res = runner.invoke(cli, ["simulate", str(tiny), "--out-dir", str(out), "--seed", "3"])
        assert res.exit_code == 0, res.output
        assert (out / "report.json").exists()
        assert "nu_0.01" in res.output
        assert "WARN" in res.output or "PASS" in res.output

    def test_invalid_config(self, runner, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[noise]\nalpha = 2.5\n")
        res = runner.invoke(cli, ["simulate", str(bad)])
        assert res.exit_code == 1
        assert "alpha" in res.output

    def test_negative_seed(self, runner, tiny):
        assert runner.invoke(cli, ["simulate", str(tiny), "--seed", "-1"]).exit_code == 1

    def test_numerical_failure(self, runner, tiny, tmp_path, monkeypatch):
        def fail(*a, **k):
            raise EnsembleFailure("only 0 of 2 trajectories survived")

        monkeypatch.setattr(cli_mod, "run_experiment", fail)
        res = runner.invoke(cli, ["simulate", str(tiny), "--out-dir", str(tmp_path)])
        assert res.exit_code == 2
        assert "survived" in res.output

    def test_threads_env(self, runner, tiny, tmp_path, monkeypatch):
        seen = {}

        def fake(cfg, threads=None, **k):
            seen["threads"] = threads
            raise EnsembleFailure("stop")

        monkeypatch.setattr(cli_mod, "run_experiment", fake)
        monkeypatch.setenv("BURG_THREADS", "3")
        runner.invoke(cli, ["simulate", str(tiny), "--threads", "1"])
        assert seen["threads"] == 3

    def test_bad_threads_env(self, runner, tiny, monkeypatch):
        monkeypatch.setenv("BURG_THREADS", "x")
        assert runner.invoke(cli, ["simulate", str(tiny)]).exit_code != 0


class TestVerify:
    def test_quick_passes(self, runner):
        res = runner.invoke(cli, ["verify"])
        assert res.exit_code == 0, res.output
        assert "passed" in res.output

    def test_fault_exits_3(self, runner, monkeypatch):
        monkeypatch.setattr(solver, "dealias_cutoff", lambda n: n)
        res = runner.invoke(cli, ["verify"])
        assert res.exit_code == 3
        assert "FAIL  nonlinear_term_vs_convolution" in res.output


class TestFit:
    def test_power_law(self, runner, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("n,E_n\n" + "".join(f"{n},{3 * n**-2.0!r}\n" for n in range(1, 20)))
        res = runner.invoke(cli, ["fit", str(p), "--range", "2:16"])
        assert res.exit_code == 0, res.output
        data = json.loads(res.output)
        assert data["slope"] == pytest.approx(-2.0, abs=1e-12)
        assert data["n_points"] == 15

    def test_columns(self, runner, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("p,l,S_p\n" + "".join(f"2,{l},{l**0.5}\n" for l in (0.01, 0.02, 0.04, 0.08)))
        res = runner.invoke(cli, ["fit", str(p), "--range", "0.01:0.1", "--x", "l", "--y", "S_p"])
        assert json.loads(res.output)["slope"] == pytest.approx(0.5)

    def test_too_few_points(self, runner, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("x,y\n1,1\n2,2\n")
        assert runner.invoke(cli, ["fit", str(p), "--range", "1:2"]).exit_code == 1

    def test_unknown_column(self, runner, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("x,y\n1,1\n2,2\n3,3\n")
        assert runner.invoke(cli, ["fit", str(p), "--range", "1:3", "--y", "z"]).exit_code == 1


class TestMain:
    def test_version(self, capsys):
        main(["version"])
        assert capsys.readouterr().out.strip() == __version__

    def test_usage_error_is_invalid_input(self):
        with pytest.raises(SystemExit) as info:
            main(["simulate", "/no/such/file.toml"])
        assert info.value.code == 1

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as info:
            main(["frobnicate"])
        assert info.value.code == 1
