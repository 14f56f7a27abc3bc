import json
import os

import jsonschema
import pytest

from magicsim import cli
from magicsim.config import ENV_VAR, KEYS, Config, ConfigError, dump_config, load_config, parse_config


def schema(name):
    with open(os.path.join(cli.SCHEMA_DIR, f"{name}.schema.json")) as fh:
        return json.load(fh)


def run_json(capsys, *argv):
    code = cli.main([*argv, "--json"])
    out = capsys.readouterr().out
    return code, json.loads(out)


# ---------------------------------------------------------------- config


def test_parse_config_values():
    cfg = parse_config("""
        # comment
        device.r_hrs_ohm = 250e3   # trailing comment
        device.r_lrs_ohm = 25e3
        transistor.compliance = 1.6:400e-6, 5:2e-3
        array.rows = 16
        compiler.max_or_fanin = 3
        protocol.exec_duration_s = 2e-3
        energy.set_full_nj = 300
    """)
    assert cfg.device.r_hrs == 250e3 and cfg.device.r_lrs == 25e3
    assert cfg.transistor.compliance == ((1.6, 400e-6), (5.0, 2e-3))
    assert cfg.geometry.rows == 16 and cfg.geometry.cols == 4
    assert cfg.max_or_fanin == 3
    assert cfg.protocol.exec_duration == 2e-3
    assert cfg.costs.set_full == 300


@pytest.mark.parametrize("text,msg", [
    ("device.r_hrs = 1", "unknown key"),
    ("device.r_hrs_ohm = 1e5\ndevice.r_hrs_ohm = 2e5", "duplicate"),
    ("array.rows = two", "bad value"),
    ("array.rows = 2.5", "bad value"),
    ("just a line", "key = value"),
    ("transistor.compliance = 1.6", "gate_v:current_a"),
    ("device.r_lrs_ohm = 5e5", "exactly 10"),
    ("compiler.max_or_fanin = 0", "max_or_fanin"),
])
def test_config_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text)


def test_dump_round_trip():
    cfg = parse_config("device.v_set_th_v = 1.05\narray.cols = 2\nvariability.seed = 7\n")
    again = parse_config(dump_config(cfg))
    assert again.device == cfg.device and again.geometry == cfg.geometry
    assert again.variability == cfg.variability and again.protocol == cfg.protocol
    assert again.costs == cfg.costs and again.transistor == cfg.transistor
    keys = {line.split(" = ")[0] for line in dump_config(Config()).splitlines()}
    assert keys <= set(KEYS)


def test_env_var(tmp_path, monkeypatch):
    p = tmp_path / "m.conf"
    p.write_text("device.i_hold_a = 30e-6\n")
    monkeypatch.setenv(ENV_VAR, str(p))
    assert load_config().device.i_hold == 30e-6
    monkeypatch.delenv(ENV_VAR)
    assert load_config().device.i_hold == Config().device.i_hold
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "missing.conf"))


# ---------------------------------------------------------------- CLI


def test_version(capsys):
    with pytest.raises(SystemExit) as ei:
        cli.main(["--version"])
    assert ei.value.code == 0
    assert "magicsim" in capsys.readouterr().out


@pytest.mark.parametrize("kind,bits,expect", [("or", "00", 0), ("or", "10", 1), ("not", "0", 1), ("not", "1", 0)])
def test_gate(capsys, kind, bits, expect):
    code, out = run_json(capsys, "gate", kind, "--inputs", bits)
    assert code == 0
    jsonschema.validate(out, schema("gate"))
    assert out["output"] == expect == out["expected"]


def test_gate_trace_export(tmp_path, capsys):
    assert cli.main(["gate", "or", "--inputs", "11", "--out", str(tmp_path)]) == 0
    files = sorted(os.listdir(tmp_path))
    assert files and all(f.endswith(".csv") for f in files)
    assert "trace" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["gate", "or", "--inputs", "2"],
    ["gate", "not", "--inputs", "10"],
    ["run", "a |", "--assign", "a=1"],
    ["run", "a | b", "--assign", "a=1"],
    ["run", "a | b", "--assign", "a=1,b=3"],
    ["run"],
])
def test_usage_errors_exit_2(capsys, argv):
    assert cli.main(argv) == 2
    assert "error" in capsys.readouterr().err


def test_bad_config_exits_2(tmp_path, capsys):
    p = tmp_path / "bad.conf"
    p.write_text("nope = 1\n")
    assert cli.main(["--config", str(p), "config"]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_config_command(capsys, tmp_path):
    p = tmp_path / "c.conf"
    p.write_text("array.rows = 12\n")
    assert cli.main(["--config", str(p), "config"]) == 0
    out = capsys.readouterr().out
    assert "array.rows = 12" in out
    assert parse_config(out).geometry.rows == 12


def test_run_and_replay(tmp_path, capsys):
    sched = tmp_path / "s.json"
    code, out = run_json(capsys, "run", "a & !b", "--assign", "a=1,b=0", "--emit-schedule", str(sched))
    assert code == 0
    jsonschema.validate(out, schema("run"))
    assert out["output"] == 1 == out["expected"]
    jsonschema.validate(json.loads(sched.read_text()), schema("schedule"))
    code, out = run_json(capsys, "run", "--schedule", str(sched), "--assign", "a=1,b=1")
    assert code == 0 and out["output"] == 0


def test_invalid_schedule_file_exits_2(tmp_path, capsys):
    sched = tmp_path / "s.json"
    assert cli.main(["run", "a | b", "--assign", "a=0,b=0", "--emit-schedule", str(sched)]) == 0
    d = json.loads(sched.read_text())
    d["ops"] = [op for op in d["ops"] if not (op["kind"] == "init" and op["target"] == 0)]
    sched.write_text(json.dumps(d))
    capsys.readouterr()
    assert cli.main(["run", "--schedule", str(sched), "--assign", "a=0,b=0"]) == 2
    assert "not initialized to 0" in capsys.readouterr().err


def test_energy_table_json(capsys):
    code, out = run_json(capsys, "energy-table")
    assert code == 0
    jsonschema.validate(out, schema("energy-table"))


def test_calibrate_json(capsys):
    code, out = run_json(capsys, "calibrate")
    assert code == 0
    jsonschema.validate(out, schema("calibrate"))


def test_characterize_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    code, out = run_json(capsys, "characterize", "--devices", "5", "--cycles", "20", "--seed", "3", "--out", str(a))
    assert code == 0
    jsonschema.validate(out, schema("characterize"))
    assert cli.main(["characterize", "--devices", "5", "--cycles", "20", "--seed", "3", "--out", str(b)]) == 0
    names = sorted(os.listdir(a))
    assert {"hrs_cdf.csv", "lrs_cdf.csv", "cdf.svg"} <= set(names)
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()


def test_yield_json(capsys):
    code, out = run_json(capsys, "yield", "--sets", "4", "--seed", "1")
    assert code == 0
    jsonschema.validate(out, schema("yield"))
    assert out["sets"] == 4


def test_mismatch_exits_1(tmp_path, capsys):
    p = tmp_path / "hard.conf"
    p.write_text("device.v_set_th_v = 2.5\n")  # above the SET pulse peak, so nothing switches on
    code, out = run_json(capsys, "--config", str(p), "gate", "or", "--inputs", "10")
    assert code == 1
    assert out["output"] == 0 and out["expected"] == 1
