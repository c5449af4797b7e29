import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from qcmab import cli, experiments
from qcmab.game import MachineConfig
from qcmab.states import basis_state, psi3, save_state, singlet

GOLDEN = Path(__file__).parent / "golden"


def run(args, capsys):
    code = cli.main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def parse(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]


def assert_matches_golden(text, name):
    header, rows = parse(text)
    g_header, g_rows = parse((GOLDEN / name).read_bytes().decode("utf-8"))
    assert header == g_header
    assert len(rows) == len(g_rows)
    for row, g in zip(rows, g_rows):
        np.testing.assert_allclose([float(x) for x in row], [float(x) for x in g], rtol=0, atol=1e-12)


def test_grid_golden_singlet(capsys):
    code, out, _ = run(["grid", "--state", "singlet", "--step", "90"], capsys)
    assert code == 0
    assert "\r\n" in out
    assert_matches_golden(out, "grid_singlet_step90.csv")


def test_grid_golden_psi3_fixed_player(capsys):
    code, out, _ = run(["grid", "--state", "psi3", "--step", "90", "--fixed", "1=0"], capsys)
    assert code == 0
    assert_matches_golden(out, "grid_psi3_step90_fixed1.csv")


def test_grid_columns_schema():
    assert experiments.CSV_SCHEMA_VERSION == 1
    assert experiments.grid_columns(2, "both") == [
        "theta_1", "theta_2", "exp_reward_1", "exp_reward_2", "exp_total", "exp_jain", "conflict_prob", "exp_ip",
        "mc_reward_1", "mc_reward_2", "mc_total", "mc_jain", "mc_ip",
    ]
    assert experiments.realign_columns(2) == ["policy", "n_active", "checkpoint", "mean_ip", "stderr_ip", "mean_reward_1", "mean_reward_2"]


def test_singlet_grid_fairness_and_conflict():
    cols, rows = experiments.run_grid(experiments.GridSpec(singlet()))
    data = np.array(rows)
    t1, t2 = np.deg2rad(data[:, 0]), np.deg2rad(data[:, 1])
    assert np.max(np.abs(data[:, cols.index("exp_jain")] - 1)) < 1e-12
    assert np.max(np.abs(data[:, cols.index("conflict_prob")] - np.sin(t1 - t2) ** 2)) < 1e-12


def test_grid_montecarlo_close_to_exact():
    spec = experiments.GridSpec(psi3(), step=60, mode="both", trials=1000, repetitions=20, seed=3)
    data = experiments.grid_metrics(spec)
    for j in (1, 2, 3):
        assert np.max(np.abs(data[f"mc_reward_{j}"] - data[f"exp_reward_{j}"])) < 0.03


def test_grid_errors(capsys):
    assert run(["grid", "--step", "7"], capsys)[0] == 2
    assert run(["grid", "--state", "singlet", "--fixed", "3=0"], capsys)[0] == 2
    assert run(["grid", "--state", "nosuchfile.json"], capsys)[0] == 2
    assert run(["grid", "--trials", "0", "--mode", "montecarlo"], capsys)[0] == 2
    assert run(["frobnicate"], capsys)[0] == 2


def test_simulate_ledgers(capsys):
    code, out, _ = run(["simulate", "--state", "singlet", "--angles", "0,0", "--turns", "200", "--reps", "3", "--seed", "1"], capsys)
    assert code == 0
    header, rows = parse(out)
    assert header == ["repetition", "R_1", "R_2", "X_A", "X_B", "jain", "ip"]
    for row in rows:
        assert float(row[1]) == float(row[2]) == 200
        assert float(row[6]) == 1
    assert run(["simulate", "--state", "singlet", "--angles", "0"], capsys)[0] == 2


def test_verify_exit_codes(tmp_path, capsys):
    good, bad, broken = tmp_path / "psi3.json", tmp_path / "hhh.json", tmp_path / "broken.json"
    save_state(psi3(), good)
    save_state(basis_state("HHH"), bad)
    broken.write_text('{"n_players": 3, "amplitudes": [[1, 0]]}')
    code, out, _ = run(["verify", good], capsys)
    assert code == 0 and json.loads(out)["pass"] is True
    code, out, _ = run(["verify", bad, "--out", tmp_path / "r.json"], capsys)
    report = json.loads(out)
    assert code == 1
    assert {"no_conflict_terms", "rotation_invariance"} <= set(report["failing_rules"])
    assert json.loads((tmp_path / "r.json").read_text()) == report
    code, out, err = run(["verify", broken], capsys)
    assert code == 2 and out == "" and "expected 8 amplitudes" in err
    assert run(["verify", tmp_path / "missing.json"], capsys)[0] == 2


def test_solve_writes_state_and_report(tmp_path, capsys):
    out = tmp_path / "s.json"
    code, stdout, _ = run(["solve", "--n", "2", "--restarts", "3", "--seed", "4", "--out", out], capsys)
    assert code == 0
    report = json.loads((tmp_path / "s.json.report.json").read_text())
    assert report["seed"] == 4 and report["restarts"] == 3
    assert report["certification"]["pass"]
    assert json.loads(stdout)["objective"] == report["objective"]
    assert run(["verify", out], capsys)[0] == 0
    assert run(["solve", "--n", "2"], capsys)[0] == 2


def test_config_file_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "grid.cfg"
    cfg.write_text("# tiny grid\nstate = psi3\nstep=90\nfixed=1=0\n")
    code, out, _ = run(["grid", "--config", cfg], capsys)
    assert code == 0
    assert_matches_golden(out, "grid_psi3_step90_fixed1.csv")
    code, out, _ = run(["grid", "--config", cfg, "--step", "45"], capsys)
    assert len(parse(out)[1]) == 16
    cfg.write_text("colour=blue\n")
    assert run(["grid", "--config", cfg], capsys)[0] == 2
    cfg.write_text("step\n")
    assert run(["grid", "--config", cfg], capsys)[0] == 2
    assert run(["grid", "--config", tmp_path / "none.cfg"], capsys)[0] == 2


def test_seed_from_environment(monkeypatch, capsys):
    args = ["simulate", "--state", "psi3", "--angles", "0,20,40", "--turns", "50", "--reps", "2"]
    monkeypatch.setenv("QCMAB_SEED", "9")
    env_out = run(args, capsys)[1]
    monkeypatch.delenv("QCMAB_SEED")
    assert run(args + ["--seed", "9"], capsys)[1] == env_out
    assert run(args, capsys)[1] != env_out
    monkeypatch.setenv("QCMAB_SEED", "nine")
    assert run(args, capsys)[0] == 2


REPRODUCIBLE = [
    ["grid", "--state", "psi3", "--step", "60", "--mode", "both", "--trials", "50", "--reps", "2", "--seed", "7"],
    ["simulate", "--state", "a4:90", "--angles", "0,15,30,0", "--turns", "300", "--reps", "3", "--pa", "0.8", "--seed", "7"],
    ["realign", "--state", "singlet", "--policy", "random,incremental", "--n-init", "4", "--reps", "3", "--horizon", "200", "--eval", "montecarlo", "--trials", "50", "--seed", "7"],
    ["stability", "--state", "psi3", "--active", "2", "--n-init", "3", "--reps", "2", "--horizon", "300", "--seed", "7"],
]


@pytest.mark.parametrize("args", REPRODUCIBLE, ids=[a[0] for a in REPRODUCIBLE])
def test_seeded_commands_bit_reproducible(tmp_path, args, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(args + ["--out", a], capsys)[0] == 0
    assert run(args + ["--out", b], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_bytes()) > 0


def test_solve_bit_reproducible(tmp_path, capsys):
    for name in ("a", "b"):
        run(["solve", "--n", "3", "--restarts", "2", "--seed", "11", "--out", tmp_path / f"{name}.json"], capsys)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a.json.report.json").read_bytes() == (tmp_path / "b.json.report.json").read_bytes()


def test_realign_rows(capsys):
    code, out, _ = run(["realign", "--state", "singlet", "--policy", "random,incremental", "--n-init", "2", "--reps", "2",
                        "--horizon", "20", "--checkpoints", "5,10,20"], capsys)
    header, rows = parse(out)
    assert code == 0
    assert [r[0] for r in rows] == ["random"] * 3 + ["incremental"] * 3
    assert [int(r[2]) for r in rows] == [5, 10, 20] * 2


def test_stability_rows(capsys):
    code, out, _ = run(["stability", "--state", "psi3", "--active", "1", "--n-init", "2", "--reps", "2", "--horizon", "10"], capsys)
    header, rows = parse(out)
    assert code == 0
    assert header[:4] == ["checkpoint", "mean_ip", "active_mean", "passive_mean"]
    assert [int(x) for x in rows[0][-3:]] == [1, 0, 0]


def test_nan_written_as_empty_field():
    assert experiments.format_value(math.nan) == ""
    assert experiments.format_value(np.float64(2.0)) == "2"
    assert experiments.format_value(np.True_) == "1"
    text = experiments.to_csv_text(["a", "b"], [["x,y", 0.25]])
    assert text == 'a,b\r\n"x,y",0.25\r\n'


def test_module_entry_point(tmp_path):
    path = tmp_path / "s.json"
    save_state(singlet(), path)
    proc = subprocess.run([sys.executable, "-m", "qcmab", "verify", str(path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["n_players"] == 2


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        experiments.GridSpec(singlet(), mode="fast")
    with pytest.raises(ValueError):
        experiments.grid_axis(0, 180, 0)
    np.testing.assert_array_equal(experiments.grid_axis(0, 180, 45), [0, 45, 90, 135])
    spec = experiments.GridSpec(psi3(), step=90, fixed={1: 30.0}, machines=MachineConfig(0.5, 0.5))
    grid = spec.angle_grid()
    assert grid.shape == (4, 3) and np.all(grid[:, 1] == 30)


def test_reproduce_script_quick(tmp_path):
    script = Path(__file__).parents[1] / "scripts" / "reproduce_figures.py"
    proc = subprocess.run([sys.executable, str(script), "--out", str(tmp_path), "--quick"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert len(list(tmp_path.glob("*.csv"))) == 10
