import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tspmp import io as tio
from tspmp.calculus import GridFunction
from tspmp.cli import RunConfig, ConfigError, examples_summary, format_examples, main
from tspmp.dynamics import simulate
from tspmp.registry import default_control, get_problem, reference_extremal

finite = st.floats(-1e300, 1e300, allow_nan=False, allow_infinity=False)


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=20))
def test_gridfunction_csv_round_trip(rows):
    grid = np.cumsum(np.ones(len(rows))) * 0.1
    vals = np.array(rows)
    gf = GridFunction(grid, vals)
    back = tio.gridfunction_from_csv(tio.gridfunction_to_csv(gf))
    assert np.array_equal(back.grid, gf.grid) and np.array_equal(back.values, gf.values)


def test_trajectory_csv_round_trip():
    tr = simulate(get_problem("hybrid_demo"), default_control("hybrid_demo"), h=0.1)
    text = tio.trajectory_to_csv(tr)
    header = text.splitlines()[0].split(",")
    assert header == ["t", "class", "q_0", "q_1", "u_0", "cost"]
    q = tio.gridfunction_from_csv(text, ["q_0", "q_1"])
    assert np.array_equal(q.values, tr.q.values) and np.array_equal(q.grid, tr.grid)
    assert np.array_equal(tio.gridfunction_from_csv(text, ["cost"]).values, tr.q0.values)
    with pytest.raises(tio.SchemaError):
        tio.gridfunction_from_csv(text, ["nope"])
    with pytest.raises(tio.SchemaError):
        tio.gridfunction_from_csv("x,y\n1,2\n")


def test_json_encoding():
    text = tio.dumps({"b": 0.1, "a": [np.float64(1 / 3), np.int64(2), float("nan")], "c": np.array([1.5])})
    assert text.startswith('{"schema": "tspmp/1"')
    data = tio.loads(text)
    assert data["a"] == [1 / 3, 2, None] and data["c"] == [1.5]
    assert tio.format_float(0.1) == "0.10000000000000001"
    with pytest.raises(tio.SchemaError):
        tio.loads('{"schema": "other"}')


def test_json_round_trip_of_extremal(tmp_path):
    ext = reference_extremal("ex000")
    path = tio.write_json(tmp_path / "e.json", {"extremal": ext})
    back = tio.read_json(path)["extremal"]
    assert back["p"] == ext.p.values.tolist() and back["p0"] == -1.0


def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig("bogus")
    with pytest.raises(ConfigError):
        RunConfig("simulate", builtin="ex0", problem="x.json")
    with pytest.raises(ConfigError):
        RunConfig("simulate", h=0.0)


def test_examples_table():
    rows = {r["example"]: r for r in examples_summary()}
    assert rows["ex000"]["max_h"]["0"] == 0.5 and rows["ex000"]["max_h"]["1"] == 0.0
    text = format_examples(list(rows.values()))
    assert "ex000" in text and "0.5" in text


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_examples(capsys):
    code, out, _ = run_cli(capsys, "examples")
    assert code == 0 and "ex000" in out


def test_cli_certify_ex0(capsys):
    code, out, _ = run_cli(capsys, "certify", "--builtin", "ex0", "--extremal", "paper")
    data = json.loads(out)
    assert code == 0 and data["report"]["caveats"][0]["t"] == 0.0


def test_cli_certify_violation(tmp_path, capsys):
    ext = reference_extremal("ex000").to_json()
    ext["p0"] = 1.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(ext))
    code, _, _ = run_cli(capsys, "certify", "--builtin", "ex000", "--extremal", str(path))
    assert code == 2


def test_cli_config_errors(tmp_path, capsys):
    empty = tmp_path / "empty.json"
    empty.write_text("{}")
    assert run_cli(capsys, "simulate", "--problem", str(empty))[0] == 1
    assert run_cli(capsys, "nonsense")[0] == 1
    assert run_cli(capsys, "simulate", "--builtin", "no_such_problem")[0] == 1
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"unknown_key": 1}))
    assert run_cli(capsys, "simulate", "--builtin", "ex0", "--config", str(cfg))[0] == 1


def test_cli_solver_failure(tmp_path, capsys):
    prob = get_problem("ex00").to_json()
    prob["target"] = {"kind": "Singleton", "params": {"point": [0.0, 50.0]}}
    path = tmp_path / "p.json"
    path.write_text(json.dumps(prob))
    assert run_cli(capsys, "oracle", "--problem", str(path), "--b-candidates", "2")[0] == 4


def test_cli_oracle(capsys):
    code, out, _ = run_cli(capsys, "oracle", "--builtin", "ex00")
    data = json.loads(out)
    assert code == 0 and data["b"] == 2.0 and data["per_b"]["1"] is None


def test_cli_outputs_are_deterministic(tmp_path, capsys):
    for d in ("a", "b"):
        assert run_cli(capsys, "simulate", "--builtin", "hybrid_sin", "--h", "0.05", "--out", str(tmp_path / d))[0] == 0
        assert run_cli(capsys, "certify", "--builtin", "ex000", "--out", str(tmp_path / d))[0] == 0
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_cli_csv_output_parses(tmp_path, capsys):
    assert run_cli(capsys, "simulate", "--builtin", "hybrid_demo", "--h", "0.1", "--format", "csv", "--out", str(tmp_path))[0] == 0
    (path,) = tmp_path.glob("*.csv")
    q = tio.gridfunction_from_csv(path.read_text(), ["q_0", "q_1"])
    ref = simulate(get_problem("hybrid_demo"), default_control("hybrid_demo"), h=0.1)
    assert np.array_equal(q.values, ref.q.values)


def test_cli_fdcheck_and_solve(capsys):
    code, out, _ = run_cli(capsys, "fdcheck", "--builtin", "hybrid_sin", "--h", "0.01")
    assert code == 0 and json.loads(out)["order"] >= 0.9
    code, out, _ = run_cli(capsys, "solve", "--builtin", "ex0", "--method", "gradient")
    assert code in (0, 2)


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "tspmp.cli", "examples"], capture_output=True, text=True)
    assert res.returncode == 0 and "ex00" in res.stdout
