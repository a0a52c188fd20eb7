import csv
import io
import json

import numpy as np
import pytest

from nestprob import __version__
from nestprob.cli import config_hash, main
from nestprob.measures import DiscreteMeasure, NestedMeasure


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_static_insider_row(capsys):
    code, out, _ = run(capsys, "static-insider", "--R", "1")
    assert code == 0
    assert out.splitlines()[0].startswith(f"# nestprob {__version__} config=")
    (row,) = table(out)
    assert row["regime"] == "AboveR0"
    assert abs(float(row["V_closed"]) - (np.sqrt(2 / np.pi) - 1 / np.pi + 0.5)) <= 1e-15
    assert float(row["gap"]) <= 2e-3


def test_static_insider_brute(capsys):
    code, out, _ = run(capsys, "static-insider", "--R", "0.5", "--brute", "2")
    (row,) = table(out)
    assert code == 0 and abs(float(row["V_brute"]) - 0.625) <= 5e-3


def test_tolerance_failure_exit_code(capsys):
    code, out, _ = run(capsys, "static-insider", "--R", "1", "--ncells", "100", "--tol", "1e-30")
    assert code == 2


def test_usage_errors(capsys):
    assert run(capsys, "nope")[0] == 1
    assert run(capsys, "static-insider")[0] == 1
    code, _, err = run(capsys, "static-insider", "--R", "-1")
    assert code == 1 and "--R" in err
    assert run(capsys, "nested-w", "missing.json", "missing.json")[0] == 1
    assert run(capsys, "ito-check", "--case", "bogus")[0] == 1


def test_braess(capsys):
    code, out, _ = run(capsys, "braess")
    assert code == 0 and [r["cost"] for r in table(out)] == ["1.5", "2"]


def test_nash(capsys):
    code, out, _ = run(capsys, "nash", "--lambda", "0.5", "--samples", "100000")
    rows = table(out)
    assert code == 0 and [float(r["value_closed"]) for r in rows] == [0.25, 0.5]


def test_determinism(capsys):
    a = run(capsys, "nash", "--samples", "50000", "--seed", "4")[1]
    b = run(capsys, "nash", "--samples", "50000", "--seed", "4")[1]
    c = run(capsys, "nash", "--samples", "50000", "--seed", "5")[1]
    assert a == b and a != c


def test_thread_count_does_not_change_output(capsys, monkeypatch):
    args = ("hjb", "simulate", "--dx", "0.05", "--save-dt", "0.01", "--x0", "0.5", "--paths", "3000",
            "--dt-sim", "0.005")
    monkeypatch.setenv("NESTPROB_THREADS", "1")
    a = run(capsys, *args)[1]
    monkeypatch.setenv("NESTPROB_THREADS", "4")
    assert run(capsys, *args)[1] == a


def test_seventeen_digits(capsys):
    _, out, _ = run(capsys, "static-insider", "--R", "1")
    (row,) = table(out)
    assert float(row["V_closed"]) == np.sqrt(2 / np.pi) - 1 / np.pi + 0.5


def test_nested_w(tmp_path, capsys):
    a = NestedMeasure([(0.5, DiscreteMeasure.dirac(0.0)), (0.5, DiscreteMeasure.dirac(2.0))])
    b = NestedMeasure.dirac(DiscreteMeasure.dirac(1.0))
    (tmp_path / "a.json").write_text(json.dumps(a.to_dict()))
    (tmp_path / "b.json").write_text(json.dumps(b.to_dict()))
    code, out, _ = run(capsys, "nested-w", "--p", "1", str(tmp_path / "a.json"), str(tmp_path / "b.json"))
    assert code == 0 and float(table(out)[0]["distance"]) == pytest.approx(1.0)
    code, out, _ = run(capsys, "nested-w", "--p", "1", str(tmp_path / "a.json"), str(tmp_path / "b.json"),
                       "--coupling")
    assert sum(float(r["mass"]) for r in table(out)) == pytest.approx(1.0)
    assert run(capsys, "nested-w", "--p", "4", str(tmp_path / "a.json"), str(tmp_path / "b.json"))[0] == 1


def test_construct_and_nested_of(tmp_path, capsys):
    r = NestedMeasure([(0.5, DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])), (0.5, DiscreteMeasure.dirac(1.0))])
    (tmp_path / "r.json").write_text(json.dumps(r.to_dict()))
    out_path = tmp_path / "space.json"
    assert main(["construct", str(tmp_path / "r.json"), "--out", str(out_path)]) == 0
    doc = json.loads(out_path.read_text())
    assert doc["version"] == __version__ and doc["round_trip_w2"] <= 1e-9
    (tmp_path / "x.json").write_text(json.dumps(doc["space"]))
    labels = [int(v[0]) for v in doc["space"]["rvs"]["Y"]]
    (tmp_path / "labels.csv").write_text("label\n" + "\n".join(map(str, labels)) + "\n")
    code, out, _ = run(capsys, "nested-of", str(tmp_path / "x.json"), "--partition", str(tmp_path / "labels.csv"))
    assert code == 0
    back = NestedMeasure.from_dict(json.loads(out)["nested"])
    assert sorted(back.weights.tolist()) == [0.5, 0.5]
    (tmp_path / "short.csv").write_text("0\n1\n")
    assert main(["nested-of", str(tmp_path / "x.json"), "--partition", str(tmp_path / "short.csv")]) == 1


def test_dpp_config(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("steps = 2\ndt = 0.5\nmenu = nothing, observe\nG = mean_square\n")
    code, out, _ = run(capsys, "dpp", "--config", str(cfg))
    doc = json.loads(out)
    assert code == 0 and doc["value_dpp"] == doc["value_exhaustive"] and doc["argmax"] == ["observe", "observe"]
    cfg.write_text("steps = 2\nbogus = 1\n")
    assert run(capsys, "dpp", "--config", str(cfg))[0] == 1


def test_ito_check(capsys):
    code, out, _ = run(capsys, "ito-check", "--case", "quadratic-mean", "--dt", "0.0625", "--steps", "3")
    rows = table(out)
    assert code == 0 and len(rows) == 3 and set(rows[0]) == {"step", "lhs", "rhs", "residual"}
    assert run(capsys, "ito-check", "--case", "quadratic-mean", "--max-residual", "1e-6")[0] == 2


def test_hjb_csv(tmp_path, capsys):
    path = tmp_path / "v.csv"
    assert main(["hjb", "--T", "1", "--dx", "0.1", "--save-dt", "0.1", "--out", str(path)]) == 0
    rows = table(path.read_text())
    assert set(rows[0]) == {"t", "x", "v", "d2v", "sigma_star"}
    assert {r["sigma_star"] for r in rows} <= {"0", "1"}
    assert main(["hjb", "--dx", "0.1", "--dt", "0.05"]) == 1


def test_paper_suite(capsys):
    code, out, _ = run(capsys, "paper-suite")
    rows = table(out)
    assert code == 0 and rows and all(r["pass"] == "true" for r in rows)


def test_config_hash_stable():
    assert config_hash({"a": 1, "b": 2.0}) == config_hash({"b": 2.0, "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
