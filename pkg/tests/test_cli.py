"""End-to-end CLI behavior and exit codes."""

import os

import numpy as np
import pytest

from chemoflow.cli import main
from chemoflow.io_formats import read_history


def run_cli(*args):
    return main(list(args))


class TestRunCommand:
    def test_run_and_check(self, tmp_path, capsys):
        out = str(tmp_path / "out")
        code = run_cli("run", "--T=0.1", "--cells=16,16",
                       "--sample_dt=0.05", f"--outdir={out}")
        assert code == 0
        assert os.path.exists(os.path.join(out, "history.csv"))
        assert os.path.exists(os.path.join(out, "params.toml"))
        assert os.path.exists(os.path.join(out, "final.chk"))
        assert os.path.exists(os.path.join(out, "final.vtk"))
        assert run_cli("check", out) == 0

    def test_config_file_and_override(self, tmp_path):
        cfgfile = tmp_path / "case.toml"
        cfgfile.write_text("T = 0.5\ncells = [16, 16]\n")
        out = str(tmp_path / "out")
        code = run_cli("run", f"--config={cfgfile}", "--T=0.05",
                       f"--outdir={out}")
        assert code == 0
        hist = read_history(os.path.join(out, "history.csv"))
        assert hist[-1].t == pytest.approx(0.05, abs=1e-9)

    def test_usage_errors(self, capsys):
        assert run_cli("frobnicate") == 1
        assert run_cli("run", "--viscocity=2") == 1
        err = capsys.readouterr().err
        assert "viscosity" in err

    def test_numerical_failure_exit_code(self, tmp_path):
        out = str(tmp_path / "out")
        code = run_cli("run", "--T=0.1", "--cells=16,16",
                       "--max_iters=2", "--lin_tol=1e-14",
                       "--pressure_solver=cg", f"--outdir={out}")
        assert code == 2

    def test_monitor_failure_exit_code(self, tmp_path):
        out = str(tmp_path / "out")
        assert run_cli("run", "--T=0.1", "--cells=16,16",
                       f"--outdir={out}") == 0
        # corrupt the history so the mass bound fails
        path = os.path.join(out, "history.csv")
        lines = open(path).read().splitlines()
        parts = lines[-1].split(",")
        parts[1] = "99.0"
        lines[-1] = ",".join(parts)
        open(path, "w").write("\n".join(lines) + "\n")
        assert run_cli("check", out) == 3


class TestStudyCommands:
    def test_heat_test(self, capsys):
        assert run_cli("heat-test", "--cells=32,32", "--t1=0.02",
                       "--dt=0.001") == 0
        assert "max error" in capsys.readouterr().out

    def test_barenblatt(self, tmp_path, capsys):
        out = str(tmp_path / "bb")
        assert run_cli("barenblatt", "--m=2", "--cells=64,64", "--t0=1.0",
                       "--t1=1.2", f"--outdir={out}") == 0
        assert os.path.exists(os.path.join(out, "barenblatt_refine.csv"))
        assert os.path.exists(os.path.join(out, "barenblatt_final.vtk"))

    def test_barenblatt_setup_error(self, tmp_path):
        assert run_cli("barenblatt", "--m=2", "--cells=64,64",
                       "--t1=99.0") == 1

    def test_sweep_eps_writes_report(self, tmp_path):
        out = str(tmp_path / "sw")
        code = run_cli("sweep-eps", "--eps-list=1e-1,1e-2,1e-3",
                       "--cells=16,16", "--T=0.1", "--sample_dt=0.05",
                       f"--outdir={out}")
        assert code == 0
        text = open(os.path.join(out, "sweep_eps.csv")).read()
        assert "cauchy_ratios" in text

    def test_refine_writes_orders(self, tmp_path):
        out = str(tmp_path / "rf")
        code = run_cli("refine", "--grids=8,16", "--dt-coef=0.2",
                       "--cells=8,8", "--T=0.1", "--eps=1e-6",
                       f"--outdir={out}")
        assert code == 0
        text = open(os.path.join(out, "refine.csv")).read()
        assert "orders_n" in text

    def test_help(self, capsys):
        assert run_cli("--help") == 0
        assert "barenblatt" in capsys.readouterr().out

    def test_sweep_m_writes_report(self, tmp_path):
        out = str(tmp_path / "swm")
        code = run_cli("sweep-m", "--m-list=1.0,2.0", "--cells=16,16",
                       "--T=0.1", "--sample_dt=0.05", f"--outdir={out}")
        assert code == 0
        text = open(os.path.join(out, "sweep_m.csv")).read()
        assert "axis=m" in text and "pow_" in text

    def test_diffusivity_mean_flag(self, tmp_path):
        out = str(tmp_path / "hm")
        assert run_cli("run", "--T=0.05", "--cells=16,16",
                       "--diffusivity_mean=harmonic", f"--outdir={out}") == 0
        assert 'diffusivity_mean = "harmonic"' in open(
            os.path.join(out, "params.toml")).read()
