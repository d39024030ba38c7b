"""End-to-end CLI tests driven through main(argv) in-process."""

import io
import json
import subprocess
import sys

import numpy as np
import pytest

from sympsturm.cli import main
from sympsturm.serialize import SCHEMA_VERSION
from sympsturm.theorems import TheoremReport

PI = float(np.pi)


def problem(tmp_path, command, **payload):
    rec = {"schema": SCHEMA_VERSION, "command": command}
    rec.update(payload)
    path = tmp_path / f"{command.replace('-', '_')}.json"
    path.write_text(json.dumps(rec), encoding="utf-8")
    return str(path)


def rotation_problem(tmp_path, command, b, n=1):
    return problem(tmp_path, command, n=n, interval=[0.0, b], path="rotation")


def line(theta):
    return [[float(np.cos(theta))], [float(np.sin(theta))]]


# ---------------------------------------------------------------------------
# index subcommands against known values
# ---------------------------------------------------------------------------


def test_clm_rotation_full_turn(tmp_path, capsys):
    code = main(["clm", "--input", rotation_problem(tmp_path, "clm", 2.0 * PI)])
    assert code == 0
    assert capsys.readouterr().out.strip() == "2"


def test_clm_reads_stdin_by_default(monkeypatch, capsys):
    rec = {"schema": SCHEMA_VERSION, "command": "clm", "n": 1,
           "interval": [0.0, PI], "path": "rotation"}
    monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps(rec)))
    assert main(["clm"]) == 0
    assert capsys.readouterr().out.strip() == "1"


def test_rs_prints_half_integers_plainly(tmp_path, capsys):
    assert main(["rs", "--input", rotation_problem(tmp_path, "rs", 2.0 * PI)]) == 0
    assert capsys.readouterr().out.strip() == "2"
    assert main(["rs", "--input", rotation_problem(tmp_path, "rs", 0.5 * PI)]) == 0
    assert capsys.readouterr().out.strip() == "0.5"


def test_cz_rotation(tmp_path, capsys):
    assert main(["cz", "--input", rotation_problem(tmp_path, "cz", 2.0 * PI)]) == 0
    assert capsys.readouterr().out.strip() == "2"


def test_triple_and_hormander(tmp_path, capsys):
    tri = problem(tmp_path, "triple", n=1,
                  alpha={"kind": "frame", "matrix": line(0.0)},
                  beta={"kind": "frame", "matrix": line(2.0)},
                  gamma={"kind": "frame", "matrix": line(1.2)})
    assert main(["triple", "--input", tri]) == 0
    assert capsys.readouterr().out.strip() == "1"

    hor = problem(tmp_path, "hormander", n=1,
                  l1={"kind": "frame", "matrix": line(0.4)},
                  l2={"kind": "frame", "matrix": line(1.9)},
                  m1="dirichlet", m2="dirichlet")
    assert main(["hormander", "--input", hor]) == 0
    assert capsys.readouterr().out.strip() == "0"


def test_morse_scalar_oscillator(tmp_path, capsys):
    arg = problem(tmp_path, "morse", n=1, T=3.5 * PI,
                  P=[[1.0]], R=[[-1.0]], bc="dirichlet", cells=64)
    assert main(["morse", "--input", arg]) == 0
    assert capsys.readouterr().out.strip() == "3"


def test_spectral_flow_scalar_family(tmp_path, capsys):
    arg = problem(tmp_path, "spectral-flow", n=1, T=PI,
                  boundary="dirichlet-pair",
                  start=[[0.0, 0.0], [0.0, 0.0]],
                  end=[[1.0, 0.0], [0.0, 1.0]])
    assert main(["spectral-flow", "--input", arg]) == 0
    assert capsys.readouterr().out.strip() == "-1"


def test_flow_reports_quality(tmp_path, capsys):
    arg = problem(tmp_path, "flow", n=1, interval=[0.0, 1.0],
                  coefficient=[[1.0, 0.0], [0.0, 1.0]], cells=32)
    assert main(["flow", "--input", arg]) == 0
    out = capsys.readouterr().out
    assert out.startswith("cells=32 defect=")
    assert "error=" in out


def test_kepler_circular_orbit(capsys):
    code = main(["kepler", "--h", "-0.5", "--e", "0.0"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert abs(payload["s_star"] - PI) < 1e-6
    assert payload["verdict"] is True
    assert payload["bound"] == pytest.approx(2.0 * np.sqrt(2.0) * PI)


def test_kepler_reads_problem_file_from_stdin(monkeypatch, capsys):
    rec = {"schema": SCHEMA_VERSION, "command": "kepler", "h": -0.5, "e": 0.3}
    monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps(rec)))
    assert main(["kepler", "--input", "-"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["e"] == 0.3 and payload["verdict"] is True


def test_focal_comparison(tmp_path, capsys):
    arg = problem(tmp_path, "focal", n=2, interval=[0.0, 3.5],
                  metric=[[1.0, 0.0], [0.0, 1.0]],
                  tangent=[[1.0], [0.0]],
                  curvature=[[-1.0, 0.0], [0.0, -1.0]])
    assert main(["focal", "--input", arg]) == 0
    assert capsys.readouterr().out.startswith("pass ")


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def test_verify_suite_summary(capsys):
    code = main(["verify", "--theorem", "alternation", "--trials", "4", "--seed", "1"])
    assert code == 0
    out = capsys.readouterr().out
    lines = out.strip().split("\n")
    assert lines[0] == "theorem,trials,passes,skips,failures"
    cells = lines[1].split(",")
    assert cells[0] == "alternation"
    assert cells[1] == "4"
    assert int(cells[2]) + int(cells[3]) == 4
    assert cells[4] == "0"


def test_verify_writes_json_artifact(tmp_path, capsys):
    out = tmp_path / "verify.json"
    code = main(["verify", "--theorem", "zeros", "--trials", "3",
                 "--seed", "2", "--output", str(out)])
    assert code == 0
    capsys.readouterr()
    record = json.loads(out.read_text(encoding="utf-8"))
    assert record["command"] == "verify"
    assert record["seed"] == 2
    assert len(record["suites"]["zeros"]) == 3
    assert all(r["verdict"] for r in record["suites"]["zeros"] if not r["skipped"])


# ---------------------------------------------------------------------------
# exit codes and artifacts
# ---------------------------------------------------------------------------


def test_failed_verdict_exits_one(tmp_path, capsys, monkeypatch):
    # Substitute a failing report to exercise the counterexample exit path.
    import sympsturm.applications as apps

    fake = TheoremReport(theorem="conjugate_focal", instance="stub",
                         left=5, right=(0, 0), verdict=False)
    monkeypatch.setattr(apps, "conjugate_focal_comparison",
                        lambda *a, **k: fake)
    arg = problem(tmp_path, "focal", n=1, interval=[0.0, 1.0],
                  metric=[[1.0]], tangent=[[1.0]], curvature=[[0.0]])
    assert main(["focal", "--input", arg]) == 1
    assert capsys.readouterr().out.startswith("FAIL ")


def test_input_errors_exit_two(tmp_path, capsys, monkeypatch):
    assert main(["clm", "--input", str(tmp_path / "missing.json")]) == 2
    assert "error:" in capsys.readouterr().err

    monkeypatch.setattr("sys.stdin", io.StringIO("{not json"))
    assert main(["clm"]) == 2
    assert "invalid JSON" in capsys.readouterr().err

    bad = problem(tmp_path, "clm", n=1, interval=[0.0, 1.0],
                  path="rotation", extra=1)
    assert main(["clm", "--input", bad]) == 2
    assert "unknown field" in capsys.readouterr().err

    assert main(["kepler"]) == 2
    assert "needs --h and --e" in capsys.readouterr().err


def test_artifacts_are_byte_identical(tmp_path, capsys):
    arg = rotation_problem(tmp_path, "clm", 2.0 * PI)
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["clm", "--input", arg, "--output", str(out1)]) == 0
    assert main(["clm", "--input", arg, "--output", str(out2)]) == 0
    capsys.readouterr()
    data = out1.read_bytes()
    assert data == out2.read_bytes()
    record = json.loads(data)
    assert record["command"] == "clm"
    assert record["report"]["value"] == 2


def test_csv_artifact_shapes(tmp_path, capsys):
    morse = problem(tmp_path, "morse", n=1, T=3.5 * PI, P=[[1.0]],
                    R=[[-1.0]], bc="dirichlet", cells=64)
    out = tmp_path / "morse.csv"
    assert main(["morse", "--input", morse, "--format", "csv",
                 "--output", str(out)]) == 0
    text = out.read_text(encoding="utf-8")
    assert text.splitlines()[0] == "field,value"
    assert "morse_index,3" in text

    flow = problem(tmp_path, "flow", n=1, interval=[0.0, 1.0],
                   coefficient=[[1.0, 0.0], [0.0, 1.0]], cells=16)
    out = tmp_path / "flow.csv"
    assert main(["flow", "--input", flow, "--format", "csv",
                 "--output", str(out)]) == 0
    capsys.readouterr()
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,psi_11,psi_12,psi_21,psi_22"
    assert len(lines) == 18  # header plus cells + 1 sample rows


def test_log_env_values_are_tolerated(tmp_path, capsys, monkeypatch):
    arg = rotation_problem(tmp_path, "clm", PI)
    monkeypatch.setenv("SYMPSTURM_LOG", "debug")
    assert main(["clm", "--input", arg]) == 0
    monkeypatch.setenv("SYMPSTURM_LOG", "not-a-level")
    assert main(["clm", "--input", arg]) == 0
    capsys.readouterr()


def test_console_script_entry_point(tmp_path):
    arg = rotation_problem(tmp_path, "clm", PI)
    proc = subprocess.run(
        [sys.executable, "-m", "sympsturm", "clm", "--input", arg],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0
    assert proc.stdout.strip() == "1"
