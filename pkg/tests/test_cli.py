import io
import json

import pytest

from tankdiag.cli import main


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_graph():
    code, out, _ = run("graph")
    assert code == 0
    assert "Msf1 -> De1  gain +1" in out
    assert sum("->" in line for line in out.splitlines()) == 10


def test_signature():
    code, out, _ = run("signature")
    assert code == 0 and out.splitlines()[0].split() == ["r_De1", "r_De2", "r_De3", "r_Df1", "r_Df2"]


def test_diagnose_builtin():
    code, out, _ = run("diagnose", "{Msf1, Df2}", "--method", "ig")
    assert code == 0 and "{Msf1, Df2} | {Msf1, Df2}" in out


def test_diagnose_file(tmp_path):
    f = tmp_path / "s.txt"
    f.write_text("label: bias\nfault: target=De2 onset_s=50 magnitude=0.4\n")
    code, out, _ = run("diagnose", str(f), "--format", "csv")
    assert code == 0 and out.startswith("injected,")


def test_parse_error_exit(tmp_path):
    f = tmp_path / "s.txt"
    f.write_text("label: x\nfault: target=De9 onset_s=1 magnitude=1\n")
    code, _, err = run("diagnose", str(f))
    assert code == 2 and "line 2" in err


@pytest.mark.parametrize("argv", [
    ("bogus",),
    ("diagnose", "{De1}", "--method", "magic"),
    ("table1", "--format", "xml"),
    ("diagnose", "missing-file.txt"),
    ("simulate", "{De1}", "--every", "0"),
    ("diagnose", "{De1}", "--dt", "-1"),
])
def test_usage_errors(argv):
    assert run(*argv)[0] == 1


def test_numeric_failure(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"R0": 1e20}))
    code, _, err = run("graph", "--config", str(cfg))
    assert code == 3 and "numeric" in err


def test_simulate_csv(tmp_path):
    out_file = tmp_path / "trace.csv"
    code, _, _ = run("simulate", "{De1}", "--every", "1000", "-o", str(out_file))
    lines = out_file.read_text().splitlines()
    assert code == 0
    assert lines[0] == "t,true_C1,true_C2,true_C3,De1,De2,De3,Df1,Df2"
    assert len(lines) == 1 + 11


def test_table1_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("table1", "--format", "csv", "-o", str(a))[0] == 0
    assert run("table1", "--format", "csv", "-o", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_override_reaches_config():
    code, out, _ = run("simulate", "{Df1}", "--magnitude-fraction", "0.5", "--every", "10000")
    last = dict(zip(out.splitlines()[0].split(","), out.splitlines()[-1].split(",")))
    assert code == 0 and float(last["t"]) == 100.0
    assert float(last["Df1"]) == pytest.approx(1.5, abs=1e-6)
