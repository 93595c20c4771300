import json

import pytest

from wolbopt import fileio
from wolbopt.cli import main
from wolbopt.model import State
from wolbopt.sim import ImpulseSchedule, SimOptions, simulate_impulsive


def run(args, tmp_path):
    return main(args + ["--out", str(tmp_path)])


def test_equilibria_command(tmp_path, capsys):
    assert run(["equilibria", "--strain", "wmel"], tmp_path) == 0
    out = capsys.readouterr().out
    assert "Eu" in out and "4591" in out
    summary = json.loads((tmp_path / "equilibria_wmel.json").read_text())
    assert summary["equilibria"]["Eu"]["x"] == pytest.approx(4592, abs=1)
    assert "config_hash" in summary


def test_equilibria_unknown_strain(tmp_path, capsys):
    assert run(["equilibria", "--strain", "nope"], tmp_path) == 2
    assert "unknown strain" in capsys.readouterr().err


def test_equilibria_with_param_override(tmp_path):
    override = tmp_path / "strain.ini"
    override.write_text("eta = 0.95\n")
    code = run(
        ["equilibria", "--strain", "wmelpop", "--params", str(override)], tmp_path
    )
    assert code == 0
    summary = json.loads((tmp_path / "equilibria_wmelpop.json").read_text())
    assert summary["equilibria"]["Eu"]["x"] == pytest.approx(859.5, abs=1)


def test_equilibria_reproducible_bytes(tmp_path):
    a_dir = tmp_path / "a"
    b_dir = tmp_path / "b"
    a_dir.mkdir()
    b_dir.mkdir()
    assert run(["equilibria", "--strain", "wmel"], a_dir) == 0
    assert run(["equilibria", "--strain", "wmel"], b_dir) == 0
    assert (a_dir / "equilibria_wmel.json").read_bytes() == (
        b_dir / "equilibria_wmel.json"
    ).read_bytes()


def test_simulate_schedule_roundtrip(tmp_path):
    sched = tmp_path / "sched.csv"
    sched.write_text("day,size\n1,3000\n2,1500\n")
    code = run(
        ["simulate", "--strain", "wmel", "--schedule", str(sched), "--t-end", "60"],
        tmp_path,
    )
    assert code == 0
    summary = json.loads((tmp_path / "simulate_wmel.json").read_text())
    assert summary["total_released"] == 4500
    assert summary["feasible"] is True
    rows = (tmp_path / "trajectory_wmel.csv").read_text().splitlines()
    assert rows[0] == "t,x,y,u_applied"
    times = [float(r.split(",")[0]) for r in rows[1:]]
    # Jump instants appear twice (pre and post rows).
    assert times.count(1.0) == 2
    assert times.count(2.0) == 2


def test_simulate_malformed_schedule(tmp_path, capsys):
    sched = tmp_path / "bad.csv"
    sched.write_text("day,size\n1,notanumber\n")
    code = run(["simulate", "--strain", "wmel", "--schedule", str(sched)], tmp_path)
    assert code == 2
    assert ":2:" in capsys.readouterr().err


def test_impulsive_requires_control(tmp_path, capsys):
    assert run(["impulsive", "--strain", "wmel"], tmp_path) == 2
    assert "--control" in capsys.readouterr().err


def test_phase_command(tmp_path):
    assert run(["phase", "--strain", "wmel", "--grid", "10"], tmp_path) == 0
    rows = (tmp_path / "phase_wmel.csv").read_text().splitlines()
    assert rows[0] == "x,y,dx,dy"
    assert len(rows) == 101
    assert (tmp_path / "separatrix_wmel.csv").exists()


def test_ga_command_small(tmp_path):
    code = run(
        [
            "ga", "--strain", "wmel", "--frequency", "14", "--horizon", "14",
            "--pop-n", "30", "--generations", "10", "--seed", "3",
        ],
        tmp_path,
    )
    assert code == 0
    summary = json.loads((tmp_path / "ga_wmel_summary.json").read_text())
    assert summary["feasible"] is True
    assert summary["verified_feasible"] is True
    plan_rows = (tmp_path / "ga_wmel_plan.csv").read_text().splitlines()
    assert plan_rows[0] == "day,size,rule"
    assert (tmp_path / "ga_wmel_history.csv").exists()


def test_ocp_command_small_grid(tmp_path):
    code = run(
        ["ocp", "--strain", "wmel", "--grid-n", "600"],
        tmp_path,
    )
    assert code == 0
    summary = json.loads((tmp_path / "ocp_wmel_summary.json").read_text())
    assert summary["converged"] is True
    assert summary["t_star"] == pytest.approx(13.72, rel=0.05)
    ctrl = fileio.read_control_csv(tmp_path / "ocp_wmel_control.csv")
    assert ctrl.t_star == pytest.approx(summary["t_star"], rel=1e-9)


def test_impulsive_command_from_control(tmp_path):
    assert run(["ocp", "--strain", "wmel", "--grid-n", "600"], tmp_path) == 0
    code = run(
        [
            "impulsive", "--strain", "wmel", "--frequency", "7",
            "--control", str(tmp_path / "ocp_wmel_control.csv"),
        ],
        tmp_path,
    )
    assert code == 0
    summary = json.loads((tmp_path / "impulsive_wmel_summary.json").read_text())
    assert summary["schedules"]["daily"]["feasible"] is True
    assert summary["schedules"]["m7"]["feasible"] is True
    sched = fileio.read_schedule_csv(tmp_path / "impulsive_wmel_m7.csv")
    assert sched.rule_tag == "aggregate"
    assert [t for t, _ in sched.entries] == [1.0, 8.0]


def test_trajectory_csv_jump_rows(tmp_path, wmel):
    sched = ImpulseSchedule(entries=((2.0, 500),))
    traj = simulate_impulsive(wmel, State(6000.0, 0.0), sched, SimOptions(t_end=5.0))
    path = tmp_path / "traj.csv"
    fileio.write_trajectory_csv(path, traj)
    rows = [r.split(",") for r in path.read_text().splitlines()[1:]]
    at_two = [r for r in rows if float(r[0]) == 2.0]
    assert len(at_two) == 2
    pre, post = at_two
    assert float(post[2]) - float(pre[2]) == pytest.approx(500.0, abs=1e-9)
    assert float(post[3]) == pytest.approx(500.0)


def test_schedule_csv_roundtrip(tmp_path):
    sched = ImpulseSchedule(entries=((1.0, 100), (8.0, 40)), period_m=7, rule_tag="excess")
    path = tmp_path / "s.csv"
    fileio.write_schedule_csv(path, sched)
    again = fileio.read_schedule_csv(path)
    assert again.entries == sched.entries
    assert again.rule_tag == "excess"


def test_schedule_rejects_negative_and_fractional(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("day,size\n1,-5\n")
    with pytest.raises(fileio.ScheduleParseError):
        fileio.read_schedule_csv(path)
    path.write_text("day,size\n1,2.5\n")
    with pytest.raises(fileio.ScheduleParseError):
        fileio.read_schedule_csv(path)


def test_config_file_scenario(tmp_path):
    cfg = tmp_path / "scenario.ini"
    cfg.write_text("[scenario]\nstrain = wmel\nseed = 11\n\n[strain]\nomega = 0.002\n")
    code = main(["equilibria", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 0
    summary = json.loads((tmp_path / "equilibria_wmel.json").read_text())
    assert summary["scenario"]["strain"]["omega"] == 0.002
    assert summary["seed"] == 11


def test_config_file_stage_sections_with_flag_precedence(tmp_path):
    cfg = tmp_path / "scenario.ini"
    cfg.write_text(
        "[scenario]\nstrain = wmel\nfrequency = 14\n\n"
        "[ga]\npop_n = 10\ngenerations_g = 4\n"
    )
    code = main(
        [
            "ga", "--config", str(cfg), "--horizon", "14", "--seed", "3",
            "--pop-n", "25", "--out", str(tmp_path),
        ]
    )
    assert code in (0, 1)
    summary = json.loads((tmp_path / "ga_wmel_summary.json").read_text())
    assert summary["ga_config"]["pop_n"] == 25  # flag beats file
    assert summary["ga_config"]["generations_g"] == 4  # file beats default


def test_config_file_unknown_stage_key(tmp_path, capsys):
    cfg = tmp_path / "scenario.ini"
    cfg.write_text("[scenario]\nstrain = wmel\n\n[ocp]\nnot_a_knob = 1\n")
    code = main(["ocp", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 2
    assert "not_a_knob" in capsys.readouterr().err


def test_outdir_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("WOLBOPT_OUTDIR", str(tmp_path / "envout"))
    assert main(["equilibria", "--strain", "wmel"]) == 0
    assert (tmp_path / "envout" / "equilibria_wmel.json").exists()
