"""Renderer checks: schema validation, all shipped CSVs, determinism, and
the tail-band coverage of the shipped high-dimensional KSD run.

Numeric assertions operate on CSV columns only; nothing is recomputed.
"""

import csv
from pathlib import Path

import numpy as np
import pytest

from ustat_figures import FigureJob, SchemaError, load_columns, render
from ustat_figures.cli import main

DATA = Path(__file__).resolve().parents[2] / "data"

SHIPPED = [("tail", "fig1_left.csv"), ("tail", "fig1_right.csv"),
           ("tail", "fig2_left.csv"), ("tail", "fig2_right.csv"),
           ("sweep", "fig3_left.csv"), ("sweep", "fig4.csv"),
           ("ratios", "ratios_ksd.csv"), ("ratios", "ratios_mmd.csv")]


@pytest.mark.parametrize("kind,name", SHIPPED)
def test_renders_every_shipped_csv(kind, name, tmp_path):
    out = tmp_path / (name + ".png")
    render(FigureJob(src=DATA / name, kind=kind, out=out))
    assert out.exists() and out.stat().st_size > 0


def test_cli_renders_with_log_axis(tmp_path):
    out = tmp_path / "sweep.png"
    rc = main(["--kind", "sweep", "--in", str(DATA / "fig4.csv"),
               "--out", str(out), "--logx"])
    assert rc == 0 and out.exists()


def test_missing_column_exits_2_and_names_it(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("threshold,emp_mean,emp_ci_lo,gauss,gamma,chisq1,wchisq\n"
                   "0.0,1.0,0.9,1.0,,,\n")
    rc = main(["--kind", "tail", "--in", str(bad), "--out", str(tmp_path / "x.png")])
    assert rc == 2
    assert "emp_ci_hi" in capsys.readouterr().err


def test_missing_input_file_exits_2(tmp_path, capsys):
    rc = main(["--kind", "tail", "--in", str(tmp_path / "absent.csv"),
               "--out", str(tmp_path / "x.png")])
    assert rc == 2
    assert "absent.csv" in capsys.readouterr().err


def test_unknown_kind_rejected_by_parser(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["--kind", "violin", "--in", "x.csv", "--out", "y.png"])
    assert exc.value.code == 2


def test_single_row_sweep_renders(tmp_path):
    src = tmp_path / "one.csv"
    src.write_text("swept_param,value,gamma,ks_gauss,ks_gauss_sd,ks_gamma,ks_gamma_sd,"
                   "ks_chisq1,ks_chisq1_sd,rho_d,regime\n"
                   "d,16.0,32.5,0.06,0.01,0.05,0.01,,,2.7,boundary\n")
    out = tmp_path / "one.png"
    render(FigureJob(src=src, kind="sweep", out=out))
    assert out.exists() and out.stat().st_size > 0


def test_step_function_tail_renders(tmp_path):
    # constant-statistic shape: survival drops 1 -> 0 at the point mass,
    # every limit column empty
    src = tmp_path / "step.csv"
    rows = ["threshold,emp_mean,emp_ci_lo,emp_ci_hi,gauss,gamma,chisq1,wchisq"]
    for i in range(21):
        t = i / 10.0
        s = 1.0 if t < 1.0 else 0.0
        rows.append(f"{t},{s},{s},{s},,,,")
    src.write_text("\n".join(rows) + "\n")
    out = tmp_path / "step.png"
    render(FigureJob(src=src, kind="tail", out=out))
    assert out.exists() and out.stat().st_size > 0


def test_identical_inputs_give_identical_bytes(tmp_path):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    for out in (a, b):
        render(FigureJob(src=DATA / "fig1_left.csv", kind="tail", out=out))
    assert a.read_bytes() == b.read_bytes()


def test_tail_gamma_curve_tracks_empirical_closer_than_gaussian():
    # worst-case and average gap to the empirical curve, columns only
    cols = load_columns(DATA / "fig1_left.csv", "tail")
    gap_gamma = np.abs(cols["gamma"] - cols["emp_mean"])
    gap_gauss = np.abs(cols["gauss"] - cols["emp_mean"])
    assert float(gap_gamma.max()) < 0.5 * float(gap_gauss.max())
    assert float(gap_gamma.mean()) < 0.5 * float(gap_gauss.mean())


def test_tail_gamma_curve_inside_empirical_band():
    cols = load_columns(DATA / "fig1_left.csv", "tail")
    inside = (cols["gamma"] >= cols["emp_ci_lo"]) & (cols["gamma"] <= cols["emp_ci_hi"])
    frac = float(np.mean(inside))
    assert frac >= 0.9, (
        f"gamma limit curve inside the empirical band at {frac:.1%} of grid points; "
        "the matched limit carries only the fully degenerate variance share, which "
        "sits below the finite-n variance of the statistic at this cell, and the "
        "across-seed band is too narrow to absorb the gap")
