import csv
import io
import json

import pytest

from balayage.cli import EXIT_FAIL, EXIT_INPUT, EXIT_OK, RunConfig, main
from balayage.errors import InvalidInputError


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_and_solve_are_deterministic(tmp_path, capsys):
    path = tmp_path / "p.json"
    assert run(capsys, "gen", "--seed", "7", "--n", "5", "--out", str(path))[0] == EXIT_OK
    first = path.read_text()
    run(capsys, "gen", "--seed", "7", "--n", "5", "--out", str(path))
    assert path.read_text() == first
    assert len(json.loads(first)["h"]) == 5
    code, a, _ = run(capsys, "solve-discrete", str(path))
    _, b, _ = run(capsys, "solve-discrete", str(path))
    assert code == EXIT_OK and a == b
    assert "classification: solved-problem1" in a


def test_input_errors_exit_2(tmp_path, capsys):
    assert run(capsys, "solve-discrete", str(tmp_path / "missing.json"))[0] == EXIT_INPUT
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "kernel": ,\n}')
    code, _, err = run(capsys, "solve-discrete", str(bad))
    assert code == EXIT_INPUT and "bad.json:2:13" in err
    assert run(capsys, "verify-all", "--tol", "nonsense=1")[0] == EXIT_INPUT
    assert run(capsys, "verify-all", "--tol", "oracle")[0] == EXIT_INPUT
    assert run(capsys, "verify-all", "--suites", "oracle,bogus")[0] == EXIT_INPUT
    assert run(capsys, "frobnicate")[0] == EXIT_INPUT
    assert run(capsys, "gen", "--seed", "-1")[0] == EXIT_INPUT


def test_run_config_validation():
    with pytest.raises(InvalidInputError):
        RunConfig("verify-all", instances=0)
    with pytest.raises(InvalidInputError):
        RunConfig("verify-all", tolerances={"oracle": -1.0})


def test_verify_all_csv_is_self_consistent(capsys):
    code, out, err = run(capsys, "verify-all", "--suites", "oracle,hunt,lattice",
                         "--instances", "20", "--seed", "3")
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows and "checks passed" in err
    for row in rows:
        ok = float(row["residual"]) < float(row["threshold"])
        assert row["pass"] == ("1" if ok else "0")
    _, again, _ = run(capsys, "verify-all", "--suites", "oracle,hunt,lattice",
                      "--instances", "20", "--seed", "3")
    assert again == out


def test_tightened_tolerance_fails_with_exit_1(capsys):
    code, out, _ = run(capsys, "verify-all", "--suites", "ball", "--tol", "ball_flip=1e-12")
    assert code == EXIT_FAIL
    assert ",0\n" in out


def test_timings_column(capsys):
    _, out, _ = run(capsys, "verify-all", "--suites", "ball", "--timings")
    assert out.splitlines()[0].endswith("wall_time_ms")


def test_solve_radial(tmp_path, capsys):
    path = tmp_path / "r.json"
    path.write_text(json.dumps({"d": 1, "alpha": 0.5, "gamma": 2.0, "h": 1.0, "R": 16}))
    code, out, _ = run(capsys, "solve-radial", str(path))
    assert code == EXIT_OK
    assert "K^phi(h) at infinity: finite" in out
    path.write_text(json.dumps({"d": 1, "alpha": 0.5}))
    assert run(capsys, "solve-radial", str(path))[0] == EXIT_INPUT
