import csv
import io
import json
import math

import numpy as np
import pytest

from bridgekit.data import generate_setting, load_pollution
from bridgekit.experiments import (
    SUMMARY_FIELDS,
    eic_seed,
    mse,
    run_monte_carlo,
    run_pollution,
    run_trial,
    split_rows,
)
from bridgekit.exceptions import DimensionMismatch
from bridgekit.selection import Grid

GRID = Grid(tuple(10.0 ** (1 - 0.3 * i) for i in range(20)), (0.4, 1.0, 2.0))


def test_mse_examples():
    assert mse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert mse(np.zeros(5), np.full(5, 2.0)) == 4.0
    with pytest.raises(DimensionMismatch):
        mse([1.0], [1.0, 2.0])


def test_true_model_hits_noise_floor():
    errs = []
    for seed in range(20):
        _, test, beta, sigma = generate_setting(1, seed)
        errs.append(mse(test.X @ beta, test.y))
    se = 9.0 * math.sqrt(2.0 / 200) / math.sqrt(len(errs))
    assert abs(np.mean(errs) - 9.0) <= 4 * se


def test_single_trial_report_matches_trial():
    rep = run_monte_carlo(1, trials=1, criteria=["GBIC", "GCV"], baselines=["OLS"], seed=5, grid=GRID)
    recs = run_trial(1, 0, 5, ["GBIC", "GCV"], ["OLS"], GRID)
    assert rep.records == recs
    assert rep.summary()["GBIC"]["mse_mean"] == recs[0].mse
    assert math.isnan(rep.summary()["GBIC"]["mse_sd"])


def test_aggregation_matches_trials_csv():
    rep = run_monte_carlo(3, trials=4, criteria=["GBIC", "mAIC"], baselines=["Ridge"], seed=2, grid=GRID)
    rows = list(csv.DictReader(io.StringIO(rep.trials_csv())))
    summ = rep.summary()
    for m in rep.methods:
        e = np.array([float(r["mse"]) for r in rows if r["method"] == m])
        assert summ[m]["mse_mean"] == pytest.approx(e.mean(), rel=1e-15)
        assert summ[m]["mse_sd"] == pytest.approx(e.std(ddof=1), rel=1e-14)
    q = np.array([float(r["q"]) for r in rows if r["method"] == "GBIC"])
    assert summ["GBIC"]["q_mean"] == pytest.approx(q.mean())
    assert math.isnan(summ["Ridge"]["q_mean"])
    table = list(csv.reader(io.StringIO(rep.table_csv())))
    assert table[0] == ["statistic", "GBIC", "mAIC", "Ridge"]
    assert [r[0] for r in table[1:]] == list(SUMMARY_FIELDS)
    payload = json.loads(rep.to_json())
    assert payload["summary"]["GBIC"]["mse_mean"] == float(table[1][1])


def test_overlapping_trial_ranges_agree():
    a = run_monte_carlo(1, trials=3, criteria=["GBIC"], seed=10, grid=GRID)
    b = run_monte_carlo(1, trials=2, criteria=["GBIC"], seed=10, grid=GRID, first_trial=1)
    assert a.records[1:] == b.records
    assert [r.seed for r in a.records] == [10, 11, 12]


def test_criteria_order_does_not_matter():
    a = run_monte_carlo(1, trials=2, criteria=["GBIC", "CV", "EIC"], seed=3, grid=GRID, eic_B=5)
    b = run_monte_carlo(1, trials=2, criteria=["EIC", "CV", "GBIC"], seed=3, grid=GRID, eic_B=5)
    for m in ("GBIC", "CV", "EIC"):
        assert a.method_records(m) == b.method_records(m)


def test_thread_count_invariance():
    kw = dict(trials=3, criteria=["GBIC", "EIC"], baselines=["Lasso"], seed=7, grid=GRID, eic_B=5)
    one = run_monte_carlo(1, threads=1, **kw)
    two = run_monte_carlo(1, threads=2, **kw)
    assert one.trials_csv() == two.trials_csv()  # NaN fields defeat dataclass equality
    assert one.table_csv() == two.table_csv()


def test_eic_seed_stream_is_separate():
    a = np.random.default_rng(eic_seed(4)).integers(0, 100, 10)
    b = np.random.default_rng(4).integers(0, 100, 10)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, np.random.default_rng(eic_seed(4)).integers(0, 100, 10))


def test_bad_arguments():
    with pytest.raises(ValueError):
        run_monte_carlo(1, trials=0, criteria=["GBIC"])
    with pytest.raises(ValueError):
        run_monte_carlo(1, trials=1, criteria=["GBIC"], baselines=["SCAD"])


def test_split_rows():
    tr, te = split_rows(60, 40, 3)
    assert len(tr) == 40 and len(te) == 20
    assert sorted(np.concatenate([tr, te]).tolist()) == list(range(60))


def test_pollution_pipeline_on_synthetic_file(fake_pollution):
    data = load_pollution(fake_pollution)
    grid = Grid(tuple(10.0 ** (1 - 0.3 * i) for i in range(15)), (0.55, 0.7, 1.0))
    a = run_pollution(data, split_seed=4, grid=grid)
    b = run_pollution(data, split_seed=4, grid=grid)
    assert a.to_json() == b.to_json()
    assert set(a.prediction_errors) == {"bridge", "OLS", "Ridge", "Lasso", "ENet"}
    assert all(v > 0 for v in a.prediction_errors.values())
    assert all(1 <= j <= 15 for j in a.full_data_variables)
    assert "full_data_lambda" in a.table_csv()
