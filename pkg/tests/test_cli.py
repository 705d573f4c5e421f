import json
import subprocess
import sys

import numpy as np
import pytest

from dle import checks
from dle.cli import dumps, main

from printed_matrices import EX1, EX2


def run(capsys, *argv):
    code = main(list(argv) + ["--machine"])
    out, err = capsys.readouterr()
    doc = json.loads(out)
    assert set(doc) == {"command", "status", "data"}
    assert doc["command"] == argv[0]
    return code, doc, err


def write(tmp_path, doc, name="in.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_build_shrinking_loop(capsys):
    code, doc, _ = run(capsys, "build", "--input", "shrinking_loop")
    assert code == 0 and doc["status"] == "ok"
    step = doc["data"]["steps"][0]
    assert (step["r"], step["s"]) == (1, 2)
    np.testing.assert_allclose(step["C"], EX2["C0"], atol=1e-9)
    np.testing.assert_allclose(doc["data"]["K"], EX2["K"], atol=1e-12)


def test_build_double_edge(capsys):
    code, doc, _ = run(capsys, "build", "--input", "double_edge")
    step = doc["data"]["steps"][0]
    assert code == 0 and (step["r"], step["s"]) == (1, 1)


def test_build_single_slice(capsys, tmp_path):
    path = write(tmp_path, {"slices": [[1, 2, 3]], "spacelike": [], "timelike": []})
    code, doc, err = run(capsys, "build", "--input", path)
    assert code == 2 and doc["status"] == "error"
    assert "need >= 2 slices" in err


def test_schema_errors_name_the_key(capsys, tmp_path):
    code, _, err = run(capsys, "build", "--input", write(tmp_path, {"slices": [[1], [2]], "edges": []}))
    assert code == 2 and "edges" in err
    raw = {"steps": [{"L": [[1.0]], "R": [[1.0]]}]}
    code, _, err = run(capsys, "build", "--input", write(tmp_path, raw))
    assert code == 2 and "Rbar" in err
    raw = {"steps": [{"L": [[1.0]], "R": [[1.0]], "Rbar": [[0.0]], "Lbar": [[1.0]]}]}
    code, _, err = run(capsys, "build", "--input", write(tmp_path, raw))
    assert code == 2 and "Lbar" in err
    (tmp_path / "bad.json").write_text("{not json")
    code, _, err = run(capsys, "build", "--input", str(tmp_path / "bad.json"))
    assert code == 2 and "invalid JSON" in err
    code, _, err = run(capsys, "build")
    assert code == 2 and "--input" in err


def test_raw_matrix_input(capsys, tmp_path):
    raw = {"steps": [{"L": EX1["L"].tolist(), "R": EX1["R"].tolist(), "Rbar": EX1["Rbar"].tolist()}]}
    code, doc, _ = run(capsys, "evolve", "--input", write(tmp_path, raw), "--y0", "1,0,0,0,0,0")
    assert code == 0
    y1 = doc["data"]["slices"][1]
    np.testing.assert_allclose(y1["x"] + y1["p"], EX1["y1"], atol=1e-9)


def test_evolve_regular_loop(capsys):
    code, doc, _ = run(capsys, "evolve", "--input", "regular_loop", "--y0", "1,0,0,0,0,0", "--z0", "0,0,0,1,0,0")
    assert code == 0
    s0, s1 = doc["data"]["slices"]
    np.testing.assert_allclose(s1["x"] + s1["p"], EX1["y1"], atol=1e-9)
    assert s0["omega_with_companion"] == pytest.approx(1.0)
    assert s1["omega_with_companion"] == pytest.approx(1.0, abs=1e-12)


def test_evolve_rejection(capsys):
    code, doc, err = run(capsys, "evolve", "--input", "shrinking_loop", "--y0", "1,0,0,0,0,0")
    assert code == 3 and doc["status"] == "rejected"
    assert doc["data"]["slice"] == 0
    assert doc["data"]["residual_norm"] > 0.1
    assert "slice 0" in err


def test_evolve_project_mode(capsys):
    code, doc, _ = run(capsys, "evolve", "--input", "shrinking_loop", "--y0", "1,0,0,0,0,0", "--project", "--lambda", "0,0")
    assert code == 0 and doc["data"]["projected"] is True


def test_evolve_zero_and_lambda(capsys):
    code, doc, _ = run(capsys, "evolve", "--input", "shrinking_loop", "--y0", "0,0,0,0,0,0", "--lambda", "0,0")
    assert code == 0
    for rec in doc["data"]["slices"]:
        assert not any(rec["x"]) and not any(rec["p"])
    code, doc, _ = run(capsys, "evolve", "--input", "shrinking_loop", "--y0", "2,0,0,-1,0,0", "--lambda", "3,4")
    s1 = doc["data"]["slices"][1]
    assert s1["x"][0] == pytest.approx(3) and s1["x"][2] == pytest.approx(4)
    assert s1["post_constraint_residual"] < 1e-12
    code, _, err = run(capsys, "evolve", "--input", "shrinking_loop", "--y0", "2,0,0,-1,0,0", "--lambda", "3")
    assert code == 2 and "lambda" in err
    code, _, err = run(capsys, "evolve", "--input", "shrinking_loop", "--y0", "2,0")
    assert code == 2 and "--y0" in err
    code, _, err = run(capsys, "evolve", "--input", "shrinking_loop", "--y0", "a,b")
    assert code == 2


def test_evolve_multi_step_rejection_slice(capsys):
    code, doc, _ = run(capsys, "evolve", "--input", "narrowing", "--y0", "1,0,0,0,0,0")
    assert code == 3 and doc["data"]["slice"] == 1
    assert len(doc["data"]["partial_states"]) == 2


def test_analyze(capsys):
    code, doc, _ = run(capsys, "analyze", "--input", "shrinking_loop")
    assert code == 0 and doc["data"]["slices"][0]["dim_D"] == 4
    code, doc, _ = run(capsys, "analyze", "--input", "regular_loop")
    assert doc["data"]["slices"][0]["dim_D"] == 6 and doc["data"]["slices"][0]["dim_N"] == 0
    code, doc, _ = run(capsys, "analyze", "--input", "narrowing")
    dims = {s["dim_Ddot"] for s in doc["data"]["slices"]}
    assert dims == {2}
    assert doc["data"]["solution_product_spread"] <= 1e-8


def test_check_passes_on_example(capsys):
    code, doc, _ = run(capsys, "check", "--input", "regular_loop", "--iterations", "10")
    assert code == 0
    by_name = {r["name"]: r for r in doc["data"]["invariants"]}
    assert by_name["symplectic_conservation"]["worst"] <= 1e-8
    assert all(r["passed"] for r in by_name.values())


def test_check_corrupted_input(capsys, tmp_path):
    raw = {"steps": [{"L": [[0.0, 1.0], [0.0, 0.0]], "R": [[1.0, 0], [0, 1]], "Rbar": [[0.0, 0], [0, 0]]}]}
    code, doc, err = run(capsys, "check", "--input", write(tmp_path, raw))
    assert code == 2 and "not symmetric" in err


def test_check_failure_exit_code(capsys, monkeypatch):
    monkeypatch.setitem(checks.TOLERANCES, "penrose_conditions", -1.0)
    code, doc, err = run(capsys, "check", "--iterations", "2")
    assert code == 4 and doc["status"] == "failed"
    assert "penrose_conditions" in err


def test_check_is_deterministic(capsys):
    main(["check", "--seed", "7", "--iterations", "100", "--machine"])
    a = capsys.readouterr().out
    main(["check", "--seed", "7", "--iterations", "100", "--machine"])
    b = capsys.readouterr().out
    assert a == b
    assert json.loads(a)["data"]["iterations"] == 100


def test_human_output(capsys):
    assert main(["analyze", "--input", "widening"]) == 0
    out = capsys.readouterr().out
    assert "dim Ddot = 2" in out and not out.lstrip().startswith("{")


def test_dumps_number_format():
    text = dumps({"b": 0.1, "a": [1.0, 2, -0.0], "c": True, "d": None})
    assert text.index('"a"') < text.index('"b"')
    assert "0.10000000000000001" in text
    assert json.loads(text)["b"] == 0.1
    assert "[1.0, 2, 0.0]" in text
    with pytest.raises(ValueError):
        dumps(float("nan"))


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "dle.cli", "build", "--input", "double_edge", "--machine"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["data"]["steps"][0]["s"] == 1
    proc = subprocess.run([sys.executable, "-m", "dle.cli", "evolve", "--input", "shrinking_loop", "--y0", "1,0,0,0,0,0"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 3 and "slice 0" in proc.stderr
