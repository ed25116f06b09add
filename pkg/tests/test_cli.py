import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from bridgekit.cli import main
from bridgekit.data import Dataset, write_dataset_csv
from conftest import make_data

SMALL = ["--lambdas", "1,0.1,0.01,0.001", "--qs", "0.7,1,2"]


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, out=out, err=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def dump(tmp_path):
    path = tmp_path / "data.csv"
    write_dataset_csv(make_data(30, 4, seed=1, standardized=False), path)
    return path


def test_fit_command(dump):
    code, out, err = run(["fit", "--input", str(dump), "--lambda", "0.01", "--q", "1.5", "--format", "json"])
    assert code == 0, err
    payload = json.loads(out)
    assert len(payload["beta"]) == 4 and payload["q"] == 1.5
    assert set(payload["criteria"]) == {"GBIC", "mAIC", "mBIC", "AICc", "CV", "GCV"}


def test_fit_requires_lambda(dump):
    code, _, err = run(["fit", "--input", str(dump), "--q", "1"])
    assert code == 1 and "--lambda" in err


def test_select_prints_table_and_best(dump):
    code, out, err = run(["select", "--input", str(dump), "--criterion", "gbic", "--seed", "7"] + SMALL)
    assert code == 0, err
    lines = out.splitlines()
    assert lines[0].startswith("lambda,q,criterion")
    assert len(lines) == 1 + 12 + 1
    assert lines[-1].startswith("# best: lambda=")


def test_select_pollution_preset_on_synthetic_file(fake_pollution):
    code, out, err = run(["select", "--input", str(fake_pollution), "--criterion", "gbic",
                          "--grid", "pollution", "--seed", "7"])
    assert code == 0, err
    assert len(out.splitlines()) == 1 + 1000 + 1


def test_unknown_criterion_lists_valid_names(dump):
    code, out, err = run(["select", "--input", str(dump), "--criterion", "hqc"])
    assert code == 1 and out == ""
    for name in ("gbic", "maic", "mbic", "aicc", "cv", "gcv", "eic"):
        assert name in err
    assert "--criterion" in err


@pytest.mark.parametrize("argv, flag", [
    (["simulate"], "--setting"),
    (["simulate", "--setting", "9"], "--setting"),
    (["simulate", "--setting", "1", "--trials", "0"], "--trials"),
    (["simulate", "--setting", "1", "--baselines", "scad"], "--baselines"),
    (["select", "--input", "x.csv", "--grid", "weird"], "--grid"),
    (["select", "--input", "x.csv", "--lambdas", "a,b"], "--lambdas"),
    (["simulate", "--setting", "1", "--threads", "0"], "--threads"),
    ([], "command"),
])
def test_usage_errors_name_the_flag(argv, flag):
    code, _, err = run(argv)
    assert code == 1 and flag in err


def test_data_errors_exit_2(tmp_path):
    code, _, err = run(["select", "--input", str(tmp_path / "missing.csv")])
    assert code == 2 and "missing.csv" in err
    bad = tmp_path / "bad.csv"
    bad.write_text("y,x1\n1,2\n3,oops\n")
    code, _, err = run(["fit", "--input", str(bad), "--lambda", "1", "--q", "1"])
    assert code == 2 and "oops" in err


def test_pollution_without_data_exits_2(monkeypatch):
    import bridgekit.cli as cli

    monkeypatch.setattr(cli, "default_pollution_path", lambda: None)
    code, _, err = run(["pollution"])
    assert code == 2 and "BRIDGEKIT_POLLUTION_CSV" in err


def test_simulate_outputs_are_byte_identical(tmp_path):
    args = ["simulate", "--setting", "1", "--trials", "2", "--criteria", "gbic,maic,eic", "--eic-b", "4",
            "--baselines", "ols", "--seed", "1", "--threads", "1"] + SMALL
    for tag in ("a", "b"):
        code, out, err = run(args + ["--out", str(tmp_path / tag / "table1.csv")])
        assert code == 0, err
        assert "GBIC" in out
    for name in ("table1.csv", "trials1.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header = next(csv.reader(open(tmp_path / "a" / "table1.csv")))
    assert header == ["statistic", "GBIC", "mAIC", "EIC", "OLS"]


def test_threads_env_fallback(tmp_path, monkeypatch):
    args = ["simulate", "--setting", "3", "--trials", "2", "--criteria", "gcv", "--seed", "4"] + SMALL
    monkeypatch.setenv("BRIDGEKIT_THREADS", "2")
    run(args + ["--out", str(tmp_path / "t2.csv")])
    monkeypatch.setenv("BRIDGEKIT_THREADS", "1")
    run(args + ["--out", str(tmp_path / "t1.csv")])
    assert (tmp_path / "t1.csv").read_bytes() == (tmp_path / "t2.csv").read_bytes()
    monkeypatch.setenv("BRIDGEKIT_THREADS", "many")
    assert run(args)[0] == 1


def test_json_and_csv_carry_identical_numbers(tmp_path):
    base = ["simulate", "--setting", "1", "--trials", "2", "--criteria", "gbic,cv", "--seed", "3",
            "--threads", "1"] + SMALL
    run(base + ["--out", str(tmp_path / "t.csv")])
    run(base + ["--out", str(tmp_path / "t.json"), "--format", "json"])
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    payload = json.loads((tmp_path / "t.json").read_text())
    for row in rows[1:]:
        for method, cell in zip(rows[0][1:], row[1:]):
            js = payload["summary"][method][row[0]]
            assert (cell == "nan" and js is None) or float(cell) == js


def test_select_json_matches_csv(dump):
    _, out_csv, _ = run(["select", "--input", str(dump), "--criterion", "mbic"] + SMALL)
    _, out_json, _ = run(["select", "--input", str(dump), "--criterion", "mbic", "--format", "json"] + SMALL)
    rows = list(csv.DictReader(io.StringIO("".join(l + "\n" for l in out_csv.splitlines() if not l.startswith("#")))))
    table = json.loads(out_json)["table"]
    for r, t in zip(rows, table):
        assert float(r["value"]) == t["value"] and float(r["lambda"]) == t["lambda"]


def test_failure_leaves_no_partial_output(tmp_path, monkeypatch):
    import bridgekit.cli as cli
    from bridgekit.exceptions import TooManyFailures

    def boom(*a, **k):
        raise TooManyFailures("3 of 3 trials failed")

    monkeypatch.setattr(cli, "run_monte_carlo", boom)
    target = tmp_path / "out" / "table1.csv"
    code, _, err = run(["simulate", "--setting", "1", "--trials", "3", "--out", str(target)])
    assert code == 2 and "trials failed" in err
    assert not target.exists()
    assert not list(tmp_path.rglob("*.csv"))


def test_module_entry_point(dump):
    proc = subprocess.run([sys.executable, "-m", "bridgekit", "select", "--input", str(dump), "--criterion", "bogus"],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and "valid names" in proc.stderr
