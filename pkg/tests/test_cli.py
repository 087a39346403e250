import csv
import json
import subprocess
import sys

import pytest

from qctl.cli import RunConfig, main, parse_config
from qctl.errors import ConfigError


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- parsing -----------------------------------------------------------------

def test_parse_transfer_flags():
    cfg = parse_config(["transfer", "--lambda", "5", "--model", "commutative",
                        "--epsilon", "-0.2", "--output", "x.csv"])
    assert cfg.lam == 5.0 and cfg.epsilon == -0.2 and cfg.model == "commutative"
    assert cfg.out_format == "csv"
    assert cfg.error_model().epsilon == -0.2


def test_sweep_defaults_to_four_gains():
    cfg = parse_config(["sweep", "--model", "commutative", "--output", "s.csv"])
    assert cfg.lambdas == (0.0, 3.0, 5.0, 10.0)


def test_audit_defaults_to_json():
    cfg = parse_config(["audit", "--lambda", "5", "--model", "commutative", "--output", "a"])
    assert cfg.out_format == "json"


@pytest.mark.parametrize("argv", [
    ["sweep", "--epsilon", "0.9", "--output", "s.csv"],
    ["transfer", "--lambda", "-1", "--output", "x"],
    ["transfer", "--lambdas", "1,2", "--output", "x"],
    ["transfer", "--lambda", "1", "--n-steps", "1001", "--output", "x"],
    ["transfer", "--lambda", "1"],
    ["audit", "--lambda", "1", "--output", "x"],
    ["transfer", "--lambda", "abc", "--output", "x"],
    ["bogus", "--output", "x"],
    ["--lambda", "1", "--output", "x"],
])
def test_invalid_arguments_are_usage_errors(argv, capsys):
    assert main(argv) == 1
    assert "usage error" in capsys.readouterr().err


def test_config_file_and_flag_precedence(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("command = cyclic\nlambda = 3  # gain\nmodel = noncommutative\nepsilon = -0.1\noutput = a.csv\n")
    cfg = parse_config(["--config", str(conf), "--lambda", "5"])
    assert cfg.command == "cyclic" and cfg.lam == 5.0 and cfg.epsilon == -0.1


def test_config_text_round_trip():
    cfg = parse_config(["sweep", "--model", "noncommutative", "--eps-step", "0.05", "--output", "s.csv"])
    assert parse_config(text=cfg.to_text()) == cfg


def test_config_rejects_unknown_key():
    with pytest.raises(ConfigError):
        parse_config(text="command = sweep\ncolour = blue\n")


def test_runconfig_is_frozen():
    cfg = RunConfig("transfer", (1.0,), output="x")
    with pytest.raises(Exception):
        cfg.epsilon = 1.0


# -- outputs -----------------------------------------------------------------

def test_sweep_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--model", "commutative", "--lambdas", "0,5", "--output", str(out)]) == 0
    rows = _rows(out)
    assert rows[0] == ["lambda", "epsilon", "fidelity"]
    assert len(rows) == 1 + 2 * 41
    lam0 = {float(r[1]): float(r[2]) for r in rows[1:] if float(r[0]) == 0}
    assert lam0[-0.2] == pytest.approx(0.673, abs=0.01)
    assert lam0[0.0] == pytest.approx(1.0, abs=1e-6)


def test_cyclic_csv_and_figure(tmp_path):
    out, fig = tmp_path / "c.csv", tmp_path / "c.png"
    assert main(["cyclic", "--lambda", "5", "--model", "commutative", "--epsilon", "-0.2",
                 "--output", str(out), "--figure", str(fig)]) == 0
    rows = _rows(out)
    assert rows[0] == ["t", "P0", "P1", "Pe"]
    assert len(rows) == 1 + 14401
    assert fig.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_transfer_json(tmp_path):
    out = tmp_path / "t.json"
    assert main(["transfer", "--lambda", "0", "--model", "commutative", "--epsilon", "-0.2",
                 "--format", "json", "--output", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["fidelity"] == pytest.approx(0.673, abs=0.01)
    assert [c["level"] for c in data["checkpoints"]] == ["e", "1"]


def test_pulse_table(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["pulse-table", "--lambda", "5", "--n-steps", "1000", "--output", str(out)]) == 0
    rows = _rows(out)
    assert rows[0][:2] == ["time", "delta_e"] and len(rows[0]) == 10
    assert len(rows) == 1 + 1001


def test_audit_keys(tmp_path):
    out = tmp_path / "a.json"
    assert main(["audit", "--lambda", "5", "--model", "commutative", "--epsilon", "0.02",
                 "--output", str(out)]) == 0
    data = json.loads(out.read_text())
    for key in ("m12", "m13", "m23", "margins", "fidelity_magnus", "fidelity_numerical", "m12_bound"):
        assert key in data
    assert abs(data["fidelity_magnus"] - data["fidelity_numerical"]) < 1e-4


def test_unwritable_output_exits_2(tmp_path, capsys):
    bad = tmp_path / "missing" / "x.csv"
    assert main(["transfer", "--lambda", "0", "--output", str(bad)]) == 2
    assert "cannot write" in capsys.readouterr().err


def test_identical_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["sweep", "--model", "noncommutative", "--lambdas", "3", "--eps-step", "0.1"]
    assert main(argv + ["--output", str(a)]) == 0
    assert main(argv + ["--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_module_entry_point(tmp_path):
    out = tmp_path / "t.csv"
    proc = subprocess.run([sys.executable, "-m", "qctl", "transfer", "--lambda", "3", "--output", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
