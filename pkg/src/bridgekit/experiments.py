"""Monte Carlo study and pollution-data experiment drivers."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import METHODS, fit_baseline
from .criteria import CRITERIA, criterion_kind
from .data import Dataset, apply_standardization, generate_setting, get_setting, standardize
from .estimator import DEFAULT_CONFIG, FitConfig, predict
from .exceptions import BridgeKitError, DimensionMismatch, TooManyFailures
from .selection import Grid, default_pollution_grid, default_simulation_grid, fmt17, select_many

logger = logging.getLogger(__name__)

MAX_FAILED_FRACTION = 0.05
SUMMARY_FIELDS = ("mse_mean", "mse_sd", "log10lambda_mean", "log10lambda_sd", "q_mean", "q_sd")
TRIAL_FIELDS = ("trial", "seed", "method", "mse", "log10_lambda", "q")


def mse(predicted, actual) -> float:
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if predicted.shape != actual.shape:
        raise DimensionMismatch(f"{predicted.shape} vs {actual.shape}")
    return float(np.mean((predicted - actual) ** 2))


def eic_seed(trial_seed: int) -> np.random.SeedSequence:
    """Bootstrap stream for a trial, separate from the data stream."""
    return np.random.SeedSequence([int(trial_seed), 0xE1C])


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    method: str
    mse: float
    log10_lambda: float = math.nan
    q: float = math.nan


def _sd(x) -> float:
    return float(np.std(x, ddof=1)) if len(x) > 1 else math.nan


@dataclass
class SimulationReport:
    setting: int
    trials: int
    methods: list
    records: list
    failures: list = field(default_factory=list)

    def method_records(self, method: str) -> list:
        return [r for r in self.records if r.method == method]

    def summary(self) -> dict:
        out = {}
        for m in self.methods:
            recs = self.method_records(m)
            e = [r.mse for r in recs]
            ll = [r.log10_lambda for r in recs]
            qq = [r.q for r in recs]
            bridge = m in CRITERIA
            out[m] = {
                "mse_mean": float(np.mean(e)) if e else math.nan,
                "mse_sd": _sd(e),
                "log10lambda_mean": float(np.mean(ll)) if bridge and ll else math.nan,
                "log10lambda_sd": _sd(ll) if bridge else math.nan,
                "q_mean": float(np.mean(qq)) if bridge and qq else math.nan,
                "q_sd": _sd(qq) if bridge else math.nan,
            }
        return out

    def table_csv(self) -> str:
        """Aggregates with one row per statistic and one column per method."""
        summ = self.summary()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["statistic"] + list(self.methods))
        for f in SUMMARY_FIELDS:
            w.writerow([f] + [fmt17(summ[m][f]) for m in self.methods])
        return buf.getvalue()

    def trials_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRIAL_FIELDS)
        for r in self.records:
            w.writerow([fmt17(getattr(r, f)) for f in TRIAL_FIELDS])
        return buf.getvalue()

    def to_json(self) -> str:
        summ = self.summary()
        payload = {
            "setting": self.setting,
            "trials": self.trials,
            "methods": list(self.methods),
            "summary": {m: {k: _json_num(v) for k, v in s.items()} for m, s in summ.items()},
            "records": [{f: _json_num(getattr(r, f)) for f in TRIAL_FIELDS} for r in self.records],
            "failures": self.failures,
        }
        return json.dumps(payload, indent=1)

    def human_table(self) -> str:
        summ = self.summary()
        width = max(10, *(len(m) + 2 for m in self.methods))
        lines = [f"Setting {self.setting}, {self.trials} trials"]
        lines.append(" " * 18 + "".join(f"{m:>{width}}" for m in self.methods))
        for f in SUMMARY_FIELDS:
            cells = "".join(f"{_g4(summ[m][f]):>{width}}" for m in self.methods)
            lines.append(f"{f:<18}{cells}")
        return "\n".join(lines)


def _json_num(v):
    if isinstance(v, (str, int)) and not isinstance(v, bool):
        return v
    v = float(v)
    if math.isnan(v):
        return None
    # round-trip through 17 significant digits, matching the CSV output
    return float(f"{v:.17g}")


def _g4(v) -> str:
    return "-" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.4g}"


def run_trial(setting, trial: int, seed: int, criteria, baselines, grid: Grid,
              cfg: FitConfig = DEFAULT_CONFIG, eic_B: int = 100, warm_start: bool = False):
    """Generate, fit and score one Monte Carlo replicate; returns TrialRecords."""
    train_raw, test_raw, _, _ = generate_setting(setting, seed)
    train, params = standardize(train_raw)
    records = []
    if criteria:
        results = select_many(train, grid, criteria, cfg, eic_seed(seed), eic_B, warm_start)
        for kind in criteria:
            res = results[kind]
            err = mse(predict(res.best_fit, test_raw.X, params), test_raw.y)
            records.append(TrialRecord(trial, seed, kind, err, math.log10(res.best.lam), res.best.q))
    for method in baselines:
        fit = fit_baseline(method, train, grid.lambdas, seed=seed)
        records.append(TrialRecord(trial, seed, method, mse(fit.predict(test_raw.X, params), test_raw.y)))
    return records


def _trial_job(args):
    setting, trial, seed, criteria, baselines, grid, cfg, eic_B, warm_start = args
    try:
        return trial, run_trial(setting, trial, seed, criteria, baselines, grid, cfg, eic_B, warm_start), None
    except (BridgeKitError, np.linalg.LinAlgError) as exc:
        return trial, [], f"{type(exc).__name__}: {exc}"


def run_monte_carlo(setting, trials: int = 100, criteria=CRITERIA, baselines=(), seed: int = 0,
                    grid: Grid | None = None, cfg: FitConfig = DEFAULT_CONFIG, eic_B: int = 100,
                    threads: int = 1, warm_start: bool = False, first_trial: int = 0) -> SimulationReport:
    """Repeat ``run_trial`` for trials ``first_trial .. first_trial + trials - 1``.

    Trial ``r`` draws its data from seed ``seed + r``, so reports over
    overlapping trial ranges agree trial by trial and results do not depend on
    ``threads``. Failed trials are dropped and listed; more than 5% failures
    raise TooManyFailures.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    st = get_setting(setting)
    criteria = [criterion_kind(c) for c in criteria]
    for b in baselines:
        if b not in METHODS:
            raise ValueError(f"unknown baseline {b!r}; valid: {', '.join(METHODS)}")
    grid = grid or default_simulation_grid()
    jobs = [
        (st.id, r, seed + r, criteria, list(baselines), grid, cfg, eic_B, warm_start)
        for r in range(first_trial, first_trial + trials)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_trial_job, jobs))
    else:
        outcomes = []
        for job in jobs:
            outcomes.append(_trial_job(job))
            logger.info("setting %d trial %d done", st.id, job[1])
    records, failures = [], []
    for trial, recs, err in sorted(outcomes, key=lambda o: o[0]):
        if err is None:
            records.extend(recs)
        else:
            failures.append({"trial": trial, "error": err})
    if len(failures) > MAX_FAILED_FRACTION * trials:
        raise TooManyFailures(f"{len(failures)} of {trials} trials failed: {failures[:3]}")
    return SimulationReport(st.id, trials, criteria + list(baselines), records, failures)


# --------------------------------------------------------------------------
# pollution data


@dataclass
class PollutionReport:
    split_seed: int
    prediction_errors: dict
    selected: dict
    full_data_variables: tuple
    full_data_selected: dict
    train_rows: tuple = ()

    def to_json(self) -> str:
        payload = {
            "split_seed": self.split_seed,
            "prediction_errors": {k: _json_num(v) for k, v in self.prediction_errors.items()},
            "selected": {k: [_json_num(x) for x in v] for k, v in self.selected.items()},
            "full_data_variables": list(self.full_data_variables),
            "full_data_selected": {k: _json_num(v) for k, v in self.full_data_selected.items()},
            "train_rows": list(self.train_rows),
        }
        return json.dumps(payload, indent=1)

    def table_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "prediction_error", "hyperparams"])
        for m, e in self.prediction_errors.items():
            w.writerow([m, fmt17(e), ";".join(fmt17(x) for x in self.selected.get(m, []))])
        w.writerow([])
        w.writerow(["full_data_lambda", "full_data_q", "selected_variables"])
        w.writerow([
            fmt17(self.full_data_selected["lambda"]), fmt17(self.full_data_selected["q"]),
            " ".join(str(v) for v in self.full_data_variables),
        ])
        return buf.getvalue()


def split_rows(n: int, n_train: int, seed) -> tuple:
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def pollution_split_errors(data: Dataset, split_seed: int, grid: Grid | None = None,
                           cfg: FitConfig = DEFAULT_CONFIG, n_train: int = 40,
                           baselines=METHODS) -> tuple:
    """Test-set prediction errors (raw response units) for one random split."""
    grid = grid or default_pollution_grid()
    tr_rows, te_rows = split_rows(data.n, n_train, split_seed)
    train, params = standardize(data.subset(tr_rows))
    test = data.subset(te_rows)
    res = select_many(train, grid, ["GBIC"], cfg)["GBIC"]
    errors = {"bridge": mse(predict(res.best_fit, test.X, params), test.y)}
    selected = {"bridge": [res.best.lam, res.best.q]}
    for method in baselines:
        fit = fit_baseline(method, train, grid.lambdas, seed=split_seed)
        errors[method] = mse(fit.predict(test.X, params), test.y)
        selected[method] = list(fit.selected_hyperparams)
    return errors, selected, tuple(int(i) for i in tr_rows)


def full_data_selection(data: Dataset, grid: Grid | None = None, cfg: FitConfig = DEFAULT_CONFIG):
    """GBIC selection on all observations; returns (result, 1-based variable indices)."""
    grid = grid or default_pollution_grid()
    std, _ = standardize(data)
    res = select_many(std, grid, ["GBIC"], cfg)["GBIC"]
    return res, tuple(j + 1 for j in res.best_fit.active_set)


def run_pollution(data: Dataset, split_seed: int = 0, grid: Grid | None = None,
                  cfg: FitConfig = DEFAULT_CONFIG) -> PollutionReport:
    """40/20 split prediction errors plus the full-data GBIC variable selection."""
    errors, selected, rows = pollution_split_errors(data, split_seed, grid, cfg)
    res, variables = full_data_selection(data, grid, cfg)
    return PollutionReport(
        split_seed, errors, selected, variables,
        {"lambda": res.best.lam, "q": res.best.q, "gbic": res.best_score.value}, rows,
    )


__all__ = [
    "mse", "run_trial", "run_monte_carlo", "SimulationReport", "TrialRecord",
    "PollutionReport", "run_pollution", "pollution_split_errors", "full_data_selection",
    "apply_standardization",
]
