import csv
import json

import pytest

from etmas.cli import main


def run_cli(*args):
    return main([str(a) for a in args])


def test_simulate_writes_outputs(tmp_path, capsys):
    rc = run_cli("simulate", "--scenario", "robot-arms-mixed", "--horizon", "0.3", "--step",
                 "1e-3", "--monitor", "--out", tmp_path)
    assert rc == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert [n["protocol"] for n in summary["networks"]] == ["rr", "tod"]
    assert summary["monitor"] is not None and "n_jump_violations" in summary["monitor"]
    assert summary["final"]["eta_norm"] >= 0
    with open(tmp_path / "trace.csv") as fh:
        header = next(csv.reader(fh))
    assert header == summary["columns"]
    assert (tmp_path / "trace.jsonl").stat().st_size > 0
    assert "net1: samplings=" in capsys.readouterr().out


def test_simulate_observers_counts(tmp_path):
    assert run_cli("simulate", "--scenario", "observers-coupled", "--horizon", "10",
                   "--out", tmp_path) == 0
    nets = json.loads((tmp_path / "summary.json").read_text())["networks"]
    assert [n["samplings"] for n in nets] == [50, 25]


def test_invalid_timing_override_exits_2(tmp_path, capsys):
    rc = run_cli("simulate", "--scenario", "robot-arms-rr", "--set", "net1.Delta=0.02",
                 "--out", tmp_path)
    assert rc == 2
    assert "timing bounds" in capsys.readouterr().err


def test_bad_scenario_exits_2(tmp_path):
    assert run_cli("certify", "--scenario", "nope", "--out", tmp_path) == 2


def test_numeric_blow_up_exits_3(tmp_path):
    rc = run_cli("simulate", "--scenario", "robot-arms-rr", "--horizon", "1", "--step", "0.015",
                 "--set", "model.q_p0=[0.0, 1.0e+308, 0.0, 0.0]", "--out", tmp_path)
    assert rc == 3


def test_certify_observers(tmp_path):
    assert run_cli("certify", "--scenario", "observers-coupled", "--out", tmp_path) == 0
    cert = json.loads((tmp_path / "cert.json").read_text())
    Ts = [n["T"] for n in cert["networks"]]
    assert Ts[0] > 0.4 and Ts[1] > 0.5
    assert all(n["varrho"] == [1e-9, 1e-9] for n in cert["networks"])


def test_certify_robot_arms_reports_phi0(tmp_path):
    with pytest.warns(UserWarning):
        assert run_cli("certify", "--scenario", "robot-arms-rr", "--out", tmp_path) == 0
    cert = json.loads((tmp_path / "cert.json").read_text())
    assert cert["networks"][0]["phi0"] == [1.0956, 1.0956]
    assert all(n["T"] >= n["Delta"] >= 0 for n in cert["networks"])


def test_certify_lambda_bar_one_exits_4(tmp_path):
    assert run_cli("certify", "--scenario", "observers-coupled", "--rho-ratio", "1",
                   "--out", tmp_path) == 4


def test_sweep_single_ratio(tmp_path):
    assert run_cli("sweep", "--scenario", "observers-coupled", "--ratios", "0",
                   "--out", tmp_path) == 0
    rows = list(csv.reader(open(tmp_path / "sweep.csv")))
    assert rows[0] == ["ratio", "T_net1", "T_net2"] and len(rows) == 2


def test_sweep_protocol_comparison(tmp_path):
    with pytest.warns(UserWarning):
        assert run_cli("sweep", "--scenario", "robot-arms-rr", "--out", tmp_path) == 0
    rows = list(csv.reader(open(tmp_path / "sweep.csv")))
    assert [r[0] for r in rows[1:]] == ["rr", "tod"]
    assert rows[0] == ["protocol", "T_net1", "Delta_net1", "T_net2", "Delta_net2"]


def test_dump_config_round_trip(tmp_path, capsys):
    assert run_cli("dump-config", "--scenario", "observers-coupled", "--set", "net1.T=0.1") == 0
    text = capsys.readouterr().out
    path = tmp_path / "c.yaml"
    path.write_text(text)
    assert run_cli("dump-config", "--scenario", f"custom:{path}") == 0
    assert capsys.readouterr().out == text


def test_plot_outputs(tmp_path):
    pytest.importorskip("matplotlib")
    assert run_cli("simulate", "--scenario", "robot-arms-tod", "--horizon", "0.1", "--step",
                   "1e-3", "--plot", "--out", tmp_path) == 0
    assert (tmp_path / "norms.png").exists() and (tmp_path / "events.png").exists()
