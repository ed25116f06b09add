"""Exhaustive (lambda, q) grid search."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .criteria import (
    DETERMINISTIC,
    CriterionValue,
    GridScores,
    criterion_kind,
    grid_eic,
    grid_scores,
)
from .data import Dataset
from .estimator import DEFAULT_CONFIG, BridgeFit, FitConfig, GridFit, fit_grid
from .exceptions import NoValidCandidate
from .penalty import Hyperparams

SIMULATION_QS = (0.1, 0.4, 0.7, 1.0, 1.3, 1.7, 2.0, 2.3, 2.7)
POLLUTION_QS = (0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 1.0, 1.3, 1.7, 2.0)
TIE_RTOL = 1e-10


def log_spaced_lambdas() -> tuple:
    """``10^(3 - 0.1 i)`` for i = 1..100, i.e. 10^2.9 down to 10^-7."""
    return tuple(10.0 ** (3.0 - 0.1 * i) for i in range(1, 101))


@dataclass(frozen=True)
class Grid:
    lambdas: tuple
    qs: tuple

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        qs = np.asarray(self.qs, dtype=float)
        if lam.size == 0 or qs.size == 0:
            raise ValueError("grid must be nonempty")
        if np.any(lam <= 0) or np.any(qs <= 0):
            raise ValueError("grid values must be positive")
        if lam.size > 1 and not np.all(np.diff(lam) < 0):
            raise ValueError("lambdas must be strictly decreasing")
        if len(set(qs.tolist())) != qs.size:
            raise ValueError("duplicate q values")
        object.__setattr__(self, "lambdas", tuple(float(v) for v in lam))
        object.__setattr__(self, "qs", tuple(float(v) for v in qs))

    def __len__(self):
        return len(self.lambdas) * len(self.qs)


def default_simulation_grid() -> Grid:
    return Grid(log_spaced_lambdas(), SIMULATION_QS)


def default_pollution_grid() -> Grid:
    return Grid(log_spaced_lambdas(), POLLUTION_QS)


@dataclass
class TableRow:
    hp: Hyperparams
    score: CriterionValue
    active_size: int
    converged: bool
    iterations: int


@dataclass
class SelectionResult:
    best: Hyperparams
    best_fit: BridgeFit
    best_score: CriterionValue
    table: list


def argmin_index(values, valid, lam, q) -> int:
    """Index of the smallest valid value.

    Values within ``TIE_RTOL`` (relative) of the minimum tie; ties go to the
    larger lambda, then the smaller q.
    """
    values = np.asarray(values, dtype=float)
    valid = np.asarray(valid, dtype=bool) & np.isfinite(values)
    if not valid.any():
        raise NoValidCandidate("no grid point produced a valid criterion value")
    best = np.min(values[valid])
    tied = np.flatnonzero(valid & (values - best <= TIE_RTOL * max(1.0, abs(best))))
    order = sorted(tied, key=lambda g: (-lam[g], q[g]))
    return int(order[0])


def _result(data, gf: GridFit, scores: GridScores, kind: str) -> SelectionResult:
    values, valid = scores.values[kind], scores.valid[kind]
    g = argmin_index(values, valid, gf.lam, gf.q)
    table = [
        TableRow(
            gf.hp(i), scores.criterion_value(kind, i), int(np.count_nonzero(gf.beta[i])),
            bool(gf.converged[i]), int(gf.iterations[i]),
        )
        for i in range(len(gf))
    ]
    return SelectionResult(gf.hp(g), gf.fit_at(g, data), scores.criterion_value(kind, g), table)


def select_many(data: Dataset, grid: Grid, kinds, cfg: FitConfig = DEFAULT_CONFIG,
                seed=0, eic_B: int = 100, warm_start: bool = False,
                gridfit: GridFit | None = None) -> dict:
    """Run one grid of fits and select under several criteria.

    Returns ``{kind: SelectionResult}``. All criteria share the same fits; the
    EIC resamples are drawn from ``seed``.
    """
    kinds = [criterion_kind(k) for k in kinds]
    gf = gridfit if gridfit is not None else fit_grid(data, grid.lambdas, grid.qs, cfg, warm_start)
    det = [k for k in kinds if k in DETERMINISTIC]
    scores = grid_scores(data, gf, det) if det else GridScores({}, {}, np.full(len(gf), np.nan))
    if "EIC" in kinds:
        scores.values["EIC"], scores.valid["EIC"] = grid_eic(data, gf, eic_B, seed, cfg)
    return {k: _result(data, gf, scores, k) for k in kinds}


def select(data: Dataset, grid: Grid, criterion: str = "GBIC", cfg: FitConfig = DEFAULT_CONFIG,
           seed=0, eic_B: int = 100, warm_start: bool = False) -> SelectionResult:
    """Fit every grid point and return the minimizer of ``criterion``."""
    kind = criterion_kind(criterion)
    return select_many(data, grid, [kind], cfg, seed, eic_B, warm_start)[kind]


TABLE_HEADER = ("lambda", "q", "criterion", "value", "valid", "active_size", "converged", "iters")


def table_records(result: SelectionResult):
    for row in result.table:
        yield (row.hp.lam, row.hp.q, row.score.kind, row.score.value, row.score.valid,
               row.active_size, row.converged, row.iterations)


def fmt17(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def write_selection_table(result: SelectionResult, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TABLE_HEADER)
    for rec in table_records(result):
        writer.writerow([fmt17(v) for v in rec])
