import json
import subprocess
import sys

import pytest

from mvempirical import io
from mvempirical.cli import main

OU_CONFIG = {
    "model": {"name": "mean-field-ou"},
    "process": {"kind": "self_interacting"},
    "weights": {"pi": {"kind": "discrete_delayed", "tau": 1.0}},
    "sim": {"dt": 1.0, "t_max": 2000, "stepper": "ou_exact", "seed": 3},
    "study": {"checkpoints": [20, 200, 2000], "replications": 3,
              "reference": {"gaussian_mean": 0.0, "gaussian_sd": 2.0 / 3.0}},
    "probe": {"count": 500},
}


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_help_states_seed_precedence(capsys):
    with pytest.raises(SystemExit):
        main(["convergence", "--help"])
    assert "beats sim.seed" in capsys.readouterr().out


def test_wasserstein_dirac_pair(tmp_path, capsys):
    (tmp_path / "a.csv").write_text("x_0\n0\n")
    (tmp_path / "b.csv").write_text("x_0,weight\n3,1\n")
    assert main(["wasserstein", str(tmp_path / "a.csv"), str(tmp_path / "b.csv")]) == 0
    assert capsys.readouterr().out.strip() == "3.0"


def test_wasserstein_json_and_2d(tmp_path, capsys):
    (tmp_path / "a.json").write_text(json.dumps({"atoms": [[0, 0]], "weights": [1]}))
    (tmp_path / "b.csv").write_text("x_0,x_1\n3,4\n")
    assert main(["wasserstein", str(tmp_path / "a.json"), str(tmp_path / "b.csv")]) == 0
    assert capsys.readouterr().out.strip() == "5.0"


def test_wasserstein_missing_file(tmp_path):
    assert main(["wasserstein", str(tmp_path / "nope.csv"), str(tmp_path / "nope.csv")]) == 1


def test_check_assumptions_passes(tmp_path, capsys):
    cfg = write_config(tmp_path, OU_CONFIG)
    assert main(["check-assumptions", "--config", cfg]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["monotonicity"]["n_violations"] == 0
    assert report["dissipativity"]["n_violations"] == 0


def test_check_assumptions_reports_violations(tmp_path, capsys):
    doc = dict(OU_CONFIG, model={"name": "mean-field-ou",
                                 "constants": {"alpha": 5, "beta": 2, "gamma": 3, "rho": 1, "K": 8}})
    assert main(["check-assumptions", "--config", write_config(tmp_path, doc)]) == 3
    assert json.loads(capsys.readouterr().out)["monotonicity"]["n_violations"] > 0


def test_fit_rate_on_synthetic_summary(tmp_path):
    rows = [(t, 7.0 / t, 7.0 / t, 7.0 / t, 1) for t in (10.0, 100.0, 1000.0)]
    io.write_rows(tmp_path / "summary.csv", ("t", "mean_w2_sq", "ci_low", "ci_high", "n_reps"), rows)
    out = tmp_path / "fit"
    assert main(["fit-rate", "--in", str(tmp_path / "summary.csv"), "--out", str(out), "--window", "10", "1000"]) == 0
    rate = json.loads((out / "rate.json").read_text())
    assert rate["slope"] == pytest.approx(-1.0, abs=1e-12)
    assert {"slope", "intercept", "stderr_slope", "window"} <= set(rate)


def test_fit_rate_too_few_points(tmp_path):
    io.write_rows(tmp_path / "s.csv", ("t", "mean_w2_sq"), [(1.0, 1.0), (2.0, 0.5)])
    assert main(["fit-rate", "--in", str(tmp_path / "s.csv"), "--out", str(tmp_path)]) == 2


def test_convergence_outputs_and_round_trip(tmp_path):
    cfg = write_config(tmp_path, OU_CONFIG)
    out = tmp_path / "run"
    assert main(["convergence", "--config", cfg, "--out", str(out), "--threads", "2"]) == 0
    header, rows = io.read_rows(out / "table.csv")
    assert header == ["t", "replicate", "w2_sq"] and len(rows) == 9
    header, rows = io.read_rows(out / "summary.csv")
    assert header == ["t", "mean_w2_sq", "ci_low", "ci_high", "n_reps"]
    rate = json.loads((out / "rate.json").read_text())
    assert rate["guaranteed_exponent"] == pytest.approx(1 / 9)
    # every float survives a write/read cycle exactly
    for r in rows:
        for v in r[:4]:
            assert io.fmt(float(v)) == v


def test_convergence_json_format(tmp_path):
    out = tmp_path / "j"
    assert main(["convergence", "--config", write_config(tmp_path, OU_CONFIG), "--out", str(out),
                 "--format", "json"]) == 0
    rows = json.loads((out / "summary.json").read_text())
    assert rows[0]["n_reps"] == 3


def test_seed_flag_overrides_config(tmp_path):
    cfg = write_config(tmp_path, OU_CONFIG)
    main(["convergence", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "3"])
    main(["convergence", "--config", cfg, "--out", str(tmp_path / "b")])
    main(["convergence", "--config", cfg, "--out", str(tmp_path / "c"), "--seed", "4"])
    a, b, c = ((tmp_path / d / "table.csv").read_bytes() for d in "abc")
    assert a == b and a != c


def test_simulate_writes_particle_files(tmp_path):
    doc = dict(OU_CONFIG, process={"kind": "particles", "n_particles": 3, "y0": [0.0, 0.5, 1.0]},
               sim={"dt": 0.1, "t_max": 2.0})
    out = tmp_path / "sim"
    assert main(["simulate", "--config", write_config(tmp_path, doc), "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["path_p0.csv", "path_p1.csv", "path_p2.csv"]
    rec = io.read_path_csv(out / "path_p2.csv")
    assert rec.states[0, 0] == 1.0 and len(rec.times) == 21


def test_simulate_frozen_uses_reference(tmp_path):
    doc = dict(OU_CONFIG, process={"kind": "frozen"}, sim={"dt": 0.1, "t_max": 1.0})
    assert main(["simulate", "--config", write_config(tmp_path, doc), "--out", str(tmp_path / "f")]) == 0


def test_reference_file_relative_to_config(tmp_path):
    sub = tmp_path / "conf"
    sub.mkdir()
    (sub / "ref.csv").write_text("x_0\n-0.5\n0.5\n")
    study = dict(OU_CONFIG["study"], reference={"file": "ref.csv"})
    cfg = write_config(sub, dict(OU_CONFIG, study=study))
    assert main(["convergence", "--config", cfg, "--out", str(tmp_path / "o")]) == 0


def test_reproduce_ou_report(tmp_path):
    out = tmp_path / "ou"
    assert main(["reproduce-ou", "--steps", "2000", "--replications", "3", "--particles", "1", "5",
                 "--out", str(out)]) == 0
    header, rows = io.read_rows(out / "ou_report.csv")
    assert header == ["step", "n_particles", "mean_err", "mean_err_ci_low", "mean_err_ci_high",
                      "var_err", "var_err_ci_low", "var_err_ci_high"]
    assert {r[1] for r in rows} == {"1", "5"}


def test_pi_stats(tmp_path):
    out = tmp_path / "pi"
    assert main(["pi-stats", "--family", "dirac", "--eps", "0.5", "--times", "100", "--out", str(out)]) == 0
    _, rows = io.read_rows(out / "pi_stats.csv")
    assert [float(v) for v in rows[0]] == [100.0, 1.0, 1.0, 10.0]


@pytest.mark.parametrize("doc,key", [
    ({"modle": {"name": "mean-field-ou"}}, "modle"),
    ({"model": {"name": "mean-field-ou", "parms": {}}}, "model.parms"),
    ({"model": {"name": "nope"}}, "model.name"),
    ({"model": {"name": "linear", "params": {"a": 1, "c": 5}}}, "model.params"),
    ({"model": {"name": "mean-field-ou"}, "sim": {"dt": -1, "t_max": 1}}, "sim.dt"),
    ({"model": {"name": "mean-field-ou"}, "study": {"checkpoints": [1], "reference": {"file": "missing.csv"}}},
     "study.reference.file"),
])
def test_config_errors_name_the_key(tmp_path, capsys, doc, key):
    code = main(["check-assumptions", "--config", write_config(tmp_path, doc)])
    assert code == 1
    assert f"'{key}" in capsys.readouterr().err


def test_missing_section_is_config_error(tmp_path, capsys):
    assert main(["convergence", "--config", write_config(tmp_path, {"model": {"name": "cubic"}})]) == 1
    assert "'sim'" in capsys.readouterr().err


def test_runtime_error_exit_code(tmp_path):
    doc = dict(OU_CONFIG, model={"name": "cubic"}, process={"kind": "self_interacting", "y0": 50.0},
               weights={"pi": {"kind": "dirac"}}, sim={"dt": 0.5, "t_max": 50.0})
    assert main(["simulate", "--config", write_config(tmp_path, doc), "--out", str(tmp_path / "x")]) == 2


def test_module_entry_point(tmp_path):
    (tmp_path / "a.csv").write_text("x_0\n1\n")
    out = subprocess.run([sys.executable, "-m", "mvempirical", "wasserstein", str(tmp_path / "a.csv"),
                          str(tmp_path / "a.csv")], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip() == "0.0"
