import json
import math
import os
import subprocess
import sys

import pytest

from cocycle_lab import cli
from cocycle_lab.outputs import csv_bytes, format_value, json_bytes, write_all

DIAG = {
    "cocycle": {"kind": "constant", "matrix": [[2, 0], [0, 0.5]]},
    "theta_grid": {"min": -0.1, "max": 0.1, "step": 0.05},
    "n": 2000, "samples": 4, "seed": 3, "certify": {"samples": 4},
}


def write_cfg(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc, indent=2))
    return str(p)


def test_format_value():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(math.nan) == "nan"
    assert format_value(-math.inf) == "-inf"
    assert format_value(True) == "true"
    assert format_value(None) == ""
    assert format_value(3) == "3"


def test_csv_and_json_bytes():
    assert csv_bytes(["a", "b"], [(1, "x,y")]) == b'a,b\r\n1,"x,y"\r\n'
    assert json_bytes({"b": math.inf, "a": 1}) == b'{\n  "a": 1,\n  "b": "inf"\n}\n'


def test_write_all_atomic(tmp_path):
    with pytest.raises(TypeError):
        write_all(tmp_path, {"a.txt": b"ok", "b.txt": 5})
    assert os.listdir(tmp_path) == []
    write_all(tmp_path, {"a.txt": b"ok"})
    assert (tmp_path / "a.txt").read_bytes() == b"ok"


def test_run_diag(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["run", "--config", write_cfg(tmp_path, DIAG), "--out", str(out)]) == 0
    names = sorted(os.listdir(out))
    assert names == ["certificate.json", "derivatives.json", "plotdata.csv", "sweep.csv"]
    lines = (out / "sweep.csv").read_bytes().decode().split("\r\n")
    assert lines[0].startswith("theta,lambda_plus_formula,lambda_plus_direct,lambda_minus,dominated,residual,"
                               "ddlambda_estimate")
    zero = next(l for l in lines[1:] if l.startswith("0,"))
    assert float(zero.split(",")[1]) == pytest.approx(math.log(2), abs=1e-9)
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["verdict"] == "dominated" and cert["l"] == 1
    deriv = json.loads((out / "derivatives.json").read_text())
    assert deriv["ddlambda0"] < 0


def test_dominate_command(tmp_path):
    out = tmp_path / "d"
    assert cli.main(["dominate", "--config", write_cfg(tmp_path, DIAG), "--out", str(out), "--threads", "2"]) == 0
    header = (out / "dset.csv").read_text().splitlines()[0]
    assert header == "theta,verdict,l,margin,gap_rate"


def test_malformed_step_writes_nothing(tmp_path, capsys):
    doc = dict(DIAG, theta_grid={"min": 0, "max": 1, "step": 0})
    out = tmp_path / "bad"
    code = cli.main(["sweep", "--config", write_cfg(tmp_path, doc), "--out", str(out)])
    assert code == cli.EXIT_CONFIG
    assert not out.exists()
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["field"] == "theta_grid.step" and err["line"] is not None


def test_missing_config_and_bad_flags(tmp_path, capsys):
    assert cli.main(["sweep", "--config", str(tmp_path / "none.json")]) == cli.EXIT_ERROR
    assert cli.main(["run", "--config", write_cfg(tmp_path, DIAG), "--seed", "-1"]) == cli.EXIT_CONFIG
    assert cli.main(["run", "--config", write_cfg(tmp_path, DIAG), "--threads", "-2"]) == cli.EXIT_CONFIG
    doc = write_cfg(tmp_path, DIAG, "c2.json")
    assert cli.main(["heisenberg", "--config", doc]) == cli.EXIT_CONFIG


def test_anomaly_exit(tmp_path, monkeypatch, capsys):
    import cocycle_lab.theta as th
    monkeypatch.setattr(th, "_derivative_terms", lambda oe: (0.0, 1.0))
    out = tmp_path / "anom"
    code = cli.main(["derivatives", "--config", write_cfg(tmp_path, DIAG), "--out", str(out)])
    assert code == cli.EXIT_ANOMALY
    assert not out.exists()
    assert json.loads(capsys.readouterr().err.strip())["error"] == "Anomaly"


def test_selftest_tolerance_zero(tmp_path, capsys):
    assert cli.main(["selftest", "--tolerance", "0", "--out", str(tmp_path)]) == cli.EXIT_ERROR
    text = (tmp_path / "selftest.txt").read_text()
    assert "FAIL" in text


def test_seed_changes_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = write_cfg(tmp_path, DIAG)
    cli.main(["sweep", "--config", cfg, "--out", str(a), "--seed", "1"])
    cli.main(["sweep", "--config", cfg, "--out", str(b), "--seed", "1"])
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()


def test_console_script_module(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cocycle_lab.cli", "selftest"], capture_output=True, text=True,
                          env=dict(os.environ, COCYCLE_LAB_LOG="INFO"))
    assert proc.returncode == 0
    assert proc.stdout.strip().endswith("checks passed")
