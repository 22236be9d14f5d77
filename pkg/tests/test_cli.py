import json

import pytest

from nmrsim.cli import apply_overrides, main, parse_value
from nmrsim.experiments import ConfigError


def test_parse_value():
    assert parse_value("3") == 3
    assert parse_value("[1, 2]") == [1, 2]
    assert parse_value("finite_pulses") == "finite_pulses"


def test_overrides():
    cfg = apply_overrides({"name": "qho"}, ["omega_hz=20", "seed=4", "parameters.n_times=8"], "parameters", ("name", "seed"))
    assert cfg == {"name": "qho", "seed": 4, "parameters": {"omega_hz": 20, "n_times": 8}}
    with pytest.raises(ConfigError):
        apply_overrides({}, ["novalue"])


def test_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for name in ("grover2", "dj2", "qho", "shor15", "bb1_sweep", "cp_echo", "kick_sweep", "mq_growth", "seven_spin"):
        assert name in out


def test_run_shor(tmp_path):
    assert main(["run", "--name", "shor15", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "result.json").read_text())["factors"] == [3, 5]


def test_run_from_config_with_overrides(tmp_path):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"name": "grover2", "parameters": {"marked": [3]}}))
    assert main(["run", "--config", str(cfg), "--set", "mode=finite_pulses", "--seed", "2", "--out", str(tmp_path / "o")]) == 0
    echoed = json.loads((tmp_path / "o" / "config.json").read_text())
    assert echoed["parameters"]["mode"] == "finite_pulses" and echoed["seed"] == 2
    # the echoed config reloads to the same run
    assert main(["run", "--config", str(tmp_path / "o" / "config.json"), "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "o" / "populations.csv").read_bytes() == (tmp_path / "p" / "populations.csv").read_bytes()


def test_config_errors_exit_1(tmp_path, caplog):
    missing = tmp_path / "nope.json"
    assert main(["run", "--config", str(missing), "--out", str(tmp_path)]) == 1
    assert str(missing) in caplog.text
    caplog.clear()
    assert main(["run", "--name", "qho", "--set", "bogus=1", "--out", str(tmp_path)]) == 1
    assert "bogus" in caplog.text
    assert main(["run", "--out", str(tmp_path)]) == 1
    assert main(["frobnicate"]) == 1
    bad = tmp_path / "sim.json"
    bad.write_text(json.dumps({"program": {"events": []}}))
    caplog.clear()
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "system" in caplog.text


def test_runtime_failure_exit_2(tmp_path):
    cfg = tmp_path / "sim.json"
    prog = {"events": [{"type": "framez", "spin": 5, "angle_rad": 1.0}]}
    cfg.write_text(json.dumps({"system": "two_spin", "program": prog}))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_simulate_and_spectrum(tmp_path):
    cfg = tmp_path / "sim.json"
    pulse = {"type": "pulse", "rotation": {"axis": "x", "angle_rad": 1.5707963267948966, "spin": 1}}
    cfg.write_text(json.dumps({"system": "two_spin", "program": {"events": [pulse]}, "initial_state": {"diagonal": [0.4, 0.3, 0.2, 0.1]}}))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "s")]) == 0
    for f in ("fid.csv", "fid.json", "spectrum.csv", "result.json", "config.json"):
        assert (tmp_path / "s" / f).exists()
    args = ["spectrum", "--fid", str(tmp_path / "s" / "fid.csv"), "--windows", "[[-50, 120], [120, 280]]", "--out", str(tmp_path / "t")]
    assert main(args) == 0
    ints = json.loads((tmp_path / "t" / "integrals.json").read_text())["integrals"]
    assert ints[0] == pytest.approx(ints[1], rel=0.02)
    assert (tmp_path / "s" / "spectrum.csv").read_bytes() != b""
    assert main(["spectrum", "--fid", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "u")]) == 1


def test_optimize_pulse(tmp_path):
    args = ["optimize-pulse", "--set", "restarts=1", "--set", "max_evaluations=60", "--threads", "1", "--out", str(tmp_path)]
    assert main(args) == 0
    res = json.loads((tmp_path / "result.json").read_text())
    assert 0 < res["fidelity"] <= 1
    assert json.loads((tmp_path / "pulse.json").read_text())["segments"]


def test_threads_env_fallback(monkeypatch):
    from nmrsim.parallel import thread_count

    monkeypatch.setenv("NMRSIM_THREADS", "3")
    assert thread_count() == 3
    assert thread_count(2) == 2
    monkeypatch.setenv("NMRSIM_THREADS", "0")
    with pytest.raises(ValueError):
        thread_count()
