"""CLI parsing, config files, exit codes and emitted artifacts."""

import json

import pytest

from hidim_ustat.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_moments_closed_form_example(capsys):
    code, out, _ = run(capsys, "moments", "--stat", "ksd-rbf", "--d", "2",
                       "--gamma", "fixed:2", "--mu-first", "2", "--method", "closed")
    assert code == 0
    payload = json.loads(out)
    assert payload["D"] == pytest.approx(2.0)
    assert payload["source"] == "closed"


def test_moments_hyphen_and_underscore_stats_agree(capsys):
    a = run(capsys, "moments", "--stat", "mmd-rbf", "--d", "3", "--gamma", "fixed:4",
            "--mu-first", "1", "--method", "closed")
    b = run(capsys, "moments", "--stat", "mmd_rbf", "--d", "3", "--gamma", "fixed:4",
            "--mu-first", "1", "--method", "closed")
    assert a[0] == b[0] == 0
    assert a[1] == b[1]


def test_moments_mc_close_to_closed(capsys):
    code, out, _ = run(capsys, "moments", "--stat", "ksd-rbf", "--d", "2",
                       "--gamma", "fixed:5", "--mu-first", "1",
                       "--method", "mc", "--n-mc", "3000", "--base-seed", "7")
    assert code == 0
    mc = json.loads(out)
    code, out, _ = run(capsys, "moments", "--stat", "ksd-rbf", "--d", "2",
                       "--gamma", "fixed:5", "--mu-first", "1", "--method", "closed")
    cf = json.loads(out)
    assert mc["D"] == pytest.approx(cf["D"], abs=0.05)
    assert mc["source"] == "mc"
    assert mc["m_full_3"] is not None


def test_diagnose_spiked_degenerate(capsys):
    code, out, _ = run(capsys, "diagnose", "--stat", "mmd-linear", "--d", "1000",
                       "--n", "50", "--mu-second", "10", "--cov", "spiked:0.5,0.5")
    assert code == 0
    payload = json.loads(out)
    assert payload["regime"] == "degenerate_dominant"
    assert payload["predicted_limit"] == "gamma_matched_limit"
    assert payload["rho_d"] > 3 * 7.0


def test_diagnose_h0_infinite_rho(capsys):
    code, out, _ = run(capsys, "diagnose", "--stat", "ksd-rbf", "--d", "5",
                       "--gamma", "fixed:5", "--n", "20")
    assert code == 0
    assert json.loads(out)["rho_d"] == "inf"


def test_missing_config_exit_2_names_path(capsys):
    code, _, err = run(capsys, "tailcurve", "--config", "no_such_file.json",
                       "--out", "x.csv")
    assert code == 2
    assert "no_such_file.json" in err


def test_invalid_seeds_exit_2_names_key(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"seeds": 0}')
    code, _, err = run(capsys, "tailcurve", "--config", str(p),
                       "--out", str(tmp_path / "o.csv"))
    assert code == 2
    assert "seeds" in err


def test_unknown_key_exit_2_names_key(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"sseds": 3}')
    code, _, err = run(capsys, "moments", "--config", str(p))
    assert code == 2
    assert "sseds" in err


def test_malformed_json_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    code, _, err = run(capsys, "moments", "--config", str(p))
    assert code == 2
    assert "bad.json" in err


def test_csv_commands_require_out(capsys):
    code, _, err = run(capsys, "tailcurve", "--stat", "ksd-rbf", "--d", "2",
                       "--gamma", "fixed:1", "--mu-first", "1")
    assert code == 2
    assert "out" in err


def test_median_bandwidth_rejected_for_data_free_commands(capsys):
    code, _, err = run(capsys, "moments", "--stat", "ksd-rbf", "--d", "2",
                       "--gamma", "median", "--method", "mc")
    assert code == 2
    assert "gamma" in err


def test_emit_config_round_trips(tmp_path, capsys):
    code, out, _ = run(capsys, "tailcurve", "--stat", "ksd-rbf", "--d", "7",
                       "--gamma", "dpow:1,1", "--mu-first", "2",
                       "--seeds", "3", "--reps-per-seed", "10", "--emit-config")
    assert code == 0
    p = tmp_path / "cfg.json"
    p.write_text(out)
    code2, out2, _ = run(capsys, "tailcurve", "--config", str(p), "--emit-config")
    assert code2 == 0
    assert out2 == out


def test_emit_config_is_canonical_json(capsys):
    _, out, _ = run(capsys, "sweep", "--stat", "ksd-rbf", "--d", "4",
                    "--gamma", "fixed:1", "--mu-first", "1",
                    "--vary", "gamma", "--values", "2,4", "--emit-config")
    payload = json.loads(out)
    assert list(payload) == sorted(payload)
    assert payload["vary"] == "gamma"
    assert payload["values"] == [2.0, 4.0]


def test_tailcurve_csv_written(tmp_path, capsys):
    out_path = tmp_path / "tc.csv"
    code, _, _ = run(capsys, "tailcurve", "--stat", "ksd-rbf", "--d", "3",
                     "--gamma", "fixed:5", "--mu-first", "1", "--seeds", "2",
                     "--reps-per-seed", "20", "--base-seed", "3",
                     "--out", str(out_path))
    assert code == 0
    lines = out_path.read_text().splitlines()
    assert lines[0] == "threshold,emp_mean,emp_ci_lo,emp_ci_hi,gauss,gamma,chisq1,wchisq"
    assert len(lines) == 102


def test_sweep_csv_written(tmp_path, capsys):
    out_path = tmp_path / "sw.csv"
    code, _, _ = run(capsys, "sweep", "--stat", "ksd-rbf", "--d", "3",
                     "--gamma", "fixed:1", "--mu-first", "2", "--seeds", "2",
                     "--reps-per-seed", "15", "--vary", "gamma",
                     "--values", "1,4", "--base-seed", "5", "--out", str(out_path))
    assert code == 0
    lines = out_path.read_text().splitlines()
    assert len(lines) == 3
    assert lines[1].split(",")[1] == "1.0"


def test_sweep_requires_vary_and_values(capsys):
    code, _, err = run(capsys, "sweep", "--stat", "ksd-rbf", "--d", "3",
                       "--gamma", "fixed:1", "--out", "x.csv")
    assert code == 2
    assert "vary" in err or "values" in err


def test_ratios_csv_written(tmp_path, capsys):
    out_path = tmp_path / "r.csv"
    code, _, _ = run(capsys, "ratios", "--stat", "ksd-rbf", "--gamma", "fixed:2",
                     "--mu-first", "1", "--seeds", "2", "--n-mc-moments", "400",
                     "--d-values", "1,2", "--base-seed", "2", "--out", str(out_path))
    assert code == 0
    lines = out_path.read_text().splitlines()
    assert lines[0] == "d,ratio_cond,ratio_full"
    assert len(lines) == 3


def test_spectral_csv_written(tmp_path, capsys):
    out_path = tmp_path / "s.csv"
    code, _, _ = run(capsys, "spectral", "--d", "1", "--n", "15",
                     "--gamma", "fixed:8", "--mu-first", "1", "--k-grid", "1,3",
                     "--n-mc", "300", "--n-fit", "1500", "--reps", "300",
                     "--base-seed", "4", "--out", str(out_path))
    assert code == 0
    lines = out_path.read_text().splitlines()
    assert lines[0] == "K,eps_1,eps_2,eps_3,ks_unk_vs_dn,tau_top5"
    assert len(lines) == 3


def test_spectral_rejects_high_dimension(capsys):
    code, _, err = run(capsys, "spectral", "--d", "5", "--gamma", "fixed:1",
                       "--out", "x.csv")
    assert code == 2
    assert "d" in err


@pytest.mark.filterwarnings("ignore::hidim_ustat.errors.DegenerateGaussianLimitWarning")
def test_runtime_error_exit_1(capsys):
    # KSD under H0 has D = 0: the gamma-matched limit is infeasible
    code, _, err = run(capsys, "tailcurve", "--stat", "ksd-rbf", "--d", "2",
                       "--gamma", "fixed:2", "--seeds", "2", "--reps-per-seed", "10",
                       "--grid", "fixed:-0.1,0.1,5", "--out", "/tmp/h0.csv")
    assert code == 1
    assert "GammaMatchInfeasible" in err


def test_unknown_stat_exit_2(capsys):
    code, _, err = run(capsys, "moments", "--stat", "energy", "--d", "2",
                       "--gamma", "fixed:1")
    assert code == 2
    assert "stat" in err


def test_bad_gamma_grammar_exit_2(capsys):
    code, _, err = run(capsys, "moments", "--stat", "ksd-rbf", "--d", "2",
                       "--gamma", "banana")
    assert code == 2
    assert "gamma" in err
