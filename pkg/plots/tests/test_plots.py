"""Figure rendering from real solver outputs, obtained only through the
chemoflow CLI (the documented external interface)."""

import os
import shutil
import subprocess
import sys

import pytest

from chemoflow_plots import FigureSpec, SchemaError, render
from chemoflow_plots.cli import main as plot_main
from chemoflow_plots.schema import HISTORY_COLUMNS, read_history_csv

CHEMOFLOW = shutil.which("chemoflow")
needs_solver = pytest.mark.skipif(CHEMOFLOW is None,
                                  reason="chemoflow CLI not on PATH")


def solver(*args):
    proc = subprocess.run([CHEMOFLOW, *args], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="session")
def artifacts(tmp_path_factory):
    """Small but real outputs of the run/sweep/refine/barenblatt commands."""
    if CHEMOFLOW is None:
        pytest.skip("chemoflow CLI not on PATH")
    root = tmp_path_factory.mktemp("artifacts")
    rundir = root / "run"
    solver("run", "--cells=16,16", "--T=0.2", "--sample_dt=0.05",
           f"--outdir={rundir}")
    sweepdir = root / "sweep"
    solver("sweep-eps", "--eps-list=1e-1,1e-2,1e-3", "--cells=16,16",
           "--T=0.1", "--sample_dt=0.05", f"--outdir={sweepdir}")
    refdir = root / "refine"
    solver("refine", "--grids=8,16", "--dt-coef=0.2", "--cells=8,8",
           "--T=0.1", "--eps=1e-6", f"--outdir={refdir}")
    bbdir = root / "bb"
    solver("barenblatt", "--m=2", "--refine=32,48", "--t0=1.0", "--t1=1.2",
           f"--outdir={bbdir}")
    return {
        "history": str(rundir / "history.csv"),
        "params": str(rundir / "params.toml"),
        "snapshot": str(rundir / "final.vtk"),
        "sweep": str(sweepdir / "sweep_eps.csv"),
        "refine": str(refdir / "refine.csv"),
        "bb_refine": str(bbdir / "barenblatt_refine.csv"),
        "bb_snapshot": str(bbdir / "barenblatt_final.vtk"),
    }


@needs_solver
class TestRender:
    def test_timeseries_with_mass_bound(self, artifacts, tmp_path):
        out = str(tmp_path / "ts.png")
        spec = FigureSpec("timeseries", (artifacts["history"],), out,
                          params_path=artifacts["params"])
        assert render(spec) == out
        assert os.path.getsize(out) > 5000

    def test_sweep_figure(self, artifacts, tmp_path):
        out = str(tmp_path / "sweep.png")
        render(FigureSpec("sweep", (artifacts["sweep"],), out))
        assert os.path.getsize(out) > 5000

    def test_refinement_figure_weakform(self, artifacts, tmp_path):
        out = str(tmp_path / "ref.png")
        render(FigureSpec("refinement", (artifacts["refine"],), out))
        assert os.path.getsize(out) > 5000

    def test_refinement_figure_barenblatt(self, artifacts, tmp_path):
        out = str(tmp_path / "bb.png")
        render(FigureSpec("refinement", (artifacts["bb_refine"],), out))
        assert os.path.getsize(out) > 5000

    def test_heatmap(self, artifacts, tmp_path):
        out = str(tmp_path / "heat.png")
        render(FigureSpec("heatmap", (artifacts["snapshot"],), out))
        assert os.path.getsize(out) > 5000

    def test_heatmap_barenblatt_field(self, artifacts, tmp_path):
        out = str(tmp_path / "bbheat.png")
        render(FigureSpec("heatmap", (artifacts["bb_snapshot"],), out,
                          fields=("n",)))
        assert os.path.getsize(out) > 3000

    def test_rerun_byte_stable(self, artifacts, tmp_path):
        a = str(tmp_path / "a.png")
        b = str(tmp_path / "b.png")
        spec_a = FigureSpec("timeseries", (artifacts["history"],), a,
                            params_path=artifacts["params"])
        spec_b = FigureSpec("timeseries", (artifacts["history"],), b,
                            params_path=artifacts["params"])
        render(spec_a)
        render(spec_b)
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_inputs_not_mutated(self, artifacts, tmp_path):
        before = open(artifacts["history"], "rb").read()
        render(FigureSpec("timeseries", (artifacts["history"],),
                          str(tmp_path / "x.png")))
        assert open(artifacts["history"], "rb").read() == before


class TestSchemaValidation:
    def test_empty_history_renders_empty_axes(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text(",".join(HISTORY_COLUMNS) + "\n")
        out = str(tmp_path / "empty.png")
        render(FigureSpec("timeseries", (str(path),), out))
        assert os.path.exists(out)

    def test_mismatched_column_named(self, tmp_path):
        cols = list(HISTORY_COLUMNS)
        cols[4] = "gradc"
        path = tmp_path / "bad.csv"
        path.write_text(",".join(cols) + "\n")
        with pytest.raises(SchemaError, match="grad_c_l2"):
            read_history_csv(str(path))
        with pytest.raises(SchemaError, match="column 5"):
            render(FigureSpec("timeseries", (str(path),),
                              str(tmp_path / "no.png")))

    def test_missing_column_named(self, tmp_path):
        path = tmp_path / "short.csv"
        path.write_text(",".join(HISTORY_COLUMNS[:-1]) + "\n")
        with pytest.raises(SchemaError, match="K_const"):
            read_history_csv(str(path))

    def test_unknown_kind_rejected(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text(",".join(HISTORY_COLUMNS) + "\n")
        with pytest.raises(SchemaError, match="kind"):
            FigureSpec("scatter", (str(path),), "x.png")

    def test_missing_input_rejected(self, tmp_path):
        with pytest.raises(SchemaError, match="not found"):
            FigureSpec("timeseries", (str(tmp_path / "nope.csv"),), "x.png")


@needs_solver
class TestCli:
    def test_cli_renders(self, artifacts, tmp_path):
        out = str(tmp_path / "cli.png")
        code = plot_main(["timeseries", artifacts["history"], "-o", out,
                          "--params", artifacts["params"]])
        assert code == 0 and os.path.exists(out)

    def test_cli_schema_error_exit(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,mass\n")
        code = plot_main(["timeseries", str(bad), "-o",
                          str(tmp_path / "x.png")])
        assert code == 1
        assert "column" in capsys.readouterr().err
