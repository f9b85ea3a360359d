from pathlib import Path

import pytest

import ssplive.nets
from ssplive.cli import main
from ssplive.pnio import load_net, parse_report

NETS = Path(ssplive.nets.__file__).parent


def _net(name):
    return str(NETS / f"{name}.net")


def test_validate_exit_codes(capsys):
    assert main(["validate", _net("two_agent_plant")]) == 0
    assert parse_report(capsys.readouterr().out)["ssp"]["ssp"] == "yes"
    assert main(["validate", _net("car_plant_monitor")]) == 1
    assert "pm feeds N1, N3" in capsys.readouterr().out


def test_usage_and_parse_errors(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "missing.net")]) == 2
    bad = tmp_path / "bad.net"
    bad.write_text("PLACE p\nARC p -> t\n")
    assert main(["semiflows", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["frobnicate"]) == 2
    assert main(["census", _net("car_plant"), "--budget", "0"]) == 2


def test_semiflows_listing(capsys):
    assert main(["semiflows", _net("two_agent_plant")]) == 0
    rep = parse_report(capsys.readouterr().out)
    assert len(rep["t_semiflows"]) == 18
    assert rep["t_semiflows"]["x7"] == "t3 + t4 + t5"
    assert rep["t_semiflows"]["x7_scope"] == "N2"


def test_synthesize_writes_control_net(tmp_path, capsys):
    assert main(["synthesize", _net("two_agent_plant"), "--out", str(tmp_path)]) == 0
    rep = parse_report(capsys.readouterr().out)["synthesis"]
    assert rep["subnets"] == "2" and rep["structurally_live"] == "yes"
    assert load_net(tmp_path / "two_agent_plant_control.net").net.name == "two_agent_plant_control"
    assert (tmp_path / "two_agent_plant_simplified.dot").exists()


def test_enforce_reports_control_places(capsys):
    assert main(["enforce", _net("proportional_plant")]) == 0
    out = capsys.readouterr().out
    rep = parse_report(out[out.index("[enforcement]"):])["enforcement"]
    assert rep["subnet_1_checks"] == "tx4"
    assert rep["subnet_1_ptx2"] == "1" and rep["added_places"] == "ptx2, ptx3"


def test_compose_writes_net(tmp_path):
    assert main(["compose", _net("two_agent_plant"), "--out", str(tmp_path)]) == 0
    d = load_net(tmp_path / "two_agent_plant_composed.net")
    assert len(d.net.transitions) > 0


def test_simulate_is_deterministic(capsys):
    args = ["simulate", _net("car_plant"), "--seed", "5", "--steps", "40"]
    assert main(args) == 0
    a = capsys.readouterr().out
    assert main(args) == 0
    assert capsys.readouterr().out == a
    assert len(a.splitlines()) == 40


def test_simulate_exhaustive(capsys):
    assert main(["simulate", _net("two_agent_plant"), "--policy", "exhaustive"]) == 0
    rep = parse_report(capsys.readouterr().out)["joint"]
    assert rep["reachable"] == "94" and rep["livelock"] == "0"


def test_refused_script_exits_one(tmp_path, capsys):
    script = tmp_path / "script.txt"
    script.write_text("t3 t4 t5 t6 t3 t5 t9\n")
    assert main(["simulate", _net("car_plant"), "--policy", f"script:{script}"]) == 1
    assert "run refused at script step 4" in capsys.readouterr().err


def test_non_ssp_is_refused_by_pipeline_commands(capsys):
    assert main(["census", _net("car_plant_monitor")]) == 1


def test_census_writes_report_and_figure(tmp_path, capsys):
    assert main(["census", _net("two_agent_plant"), "--out", str(tmp_path)]) == 0
    text = (tmp_path / "two_agent_plant_census.txt").read_text()
    assert text == capsys.readouterr().out
    rep = parse_report(text)
    assert rep["plant"]["reachable"] == "180"
    assert rep["supervised"]["reachable"] == "94"
    png = tmp_path / "two_agent_plant_census.png"
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


@pytest.mark.parametrize("name", ["car_plant", "two_agent_plant"])
def test_reduce_flag_keeps_validation(name, capsys):
    assert main(["validate", _net(name), "--reduce"]) == 0
