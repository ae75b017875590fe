import json
import subprocess
import sys

import pytest

from infectwalk.cli import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, dispatch


def test_simulate_lonely_b(capsys, tmp_path):
    code = dispatch(["simulate", "--lambda", "0", "--muA", "0", "--T", "10", "--out", str(tmp_path)])
    assert code == EXIT_OK
    line = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert line["survived"] is True and line["final_B"] == 1
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "simulate" and "summaries.jsonl" in man["outputs"]


def test_simulate_events(tmp_path):
    assert dispatch(["simulate", "--d", "1", "--L", "6", "--T", "3", "--events",
                     "--out", str(tmp_path)]) == EXIT_OK
    header = (tmp_path / "events.csv").read_text().splitlines()[0]
    assert header == "time,kind,actor,partner,src,dst"


def test_usage_errors(tmp_path, capsys):
    assert dispatch([]) == EXIT_USAGE
    assert dispatch(["sweep"]) == EXIT_USAGE
    assert dispatch(["simulate", "--d", "x"]) == EXIT_USAGE
    assert dispatch(["couple", "--lemma", "3"]) == EXIT_USAGE
    bad = tmp_path / "cfg.json"
    bad.write_text(json.dumps({"colour": "red"}))
    assert dispatch(["simulate", "--config", str(bad)]) == EXIT_USAGE
    assert "colour" in capsys.readouterr().err
    assert dispatch(["simulate", "--lambda", "-1"]) == EXIT_USAGE
    assert dispatch(["--from-manifest", str(tmp_path / "missing.json")]) == EXIT_USAGE


def test_couple_passes(capsys):
    code = dispatch(["couple", "--lemma", "3", "--lambda1", "0.2", "--lambda2", "0.8",
                     "--L", "20", "--T", "20", "--seeds", "5"])
    assert code == EXIT_OK
    out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert out == {"lemma": "rate", "seeds": 5, "violations": 0}


def test_boundary_check(capsys):
    assert dispatch(["boundary-check", "--dim", "1", "--max-size", "4"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["failures"] == 0 and out["checked"] > 0


def test_sweep_manifest_replay(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    argv = ["sweep", "--d", "1", "--muA", "1", "--L", "20", "--T", "15",
            "--lambdas", "0,0.5,2", "--replicas", "20", "--out", str(first)]
    assert dispatch(argv) in (EXIT_OK, EXIT_VIOLATION)
    assert dispatch(["--from-manifest", str(first / "manifest.json"), "--out", str(second)]) in (
        EXIT_OK, EXIT_VIOLATION)
    a = (first / "survival.csv").read_bytes()
    assert a and a == (second / "survival.csv").read_bytes()


@pytest.mark.parametrize("cmd", [["jpath", "--L", "6", "--times", "5,10"],
                                 ["converge", "--d", "1", "--L", "10", "--T", "2",
                                  "--replicas", "5", "--ns", "4"]])
def test_other_commands(cmd, tmp_path):
    assert dispatch(cmd + ["--out", str(tmp_path)]) == EXIT_OK
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert all((tmp_path / f).exists() for f in man["outputs"])


def test_console_script_version():
    res = subprocess.run([sys.executable, "-m", "infectwalk.cli", "--version"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
