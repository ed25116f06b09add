"""Datasets, standardization, simulation designs and CSV ingestion."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import (
    ConstantColumn,
    DataIOError,
    DimensionMismatch,
    ParseError,
    UnknownSetting,
    WrongShape,
)

#: column order of the bundled pollution file (McDonald & Schwing, 1973)
POLLUTION_COLUMNS = (
    "prec", "jant", "jult", "ovr65", "popn", "educ", "hous", "dens",
    "nonw", "wwdrk", "poor", "hc", "nox", "so", "humid", "mort",
)
POLLUTION_SHAPE = (60, 15)
POLLUTION_ENV = "BRIDGEKIT_POLLUTION_CSV"


@dataclass
class Dataset:
    """Responses ``y`` (n,) and covariates ``X`` (n, p)."""

    X: np.ndarray
    y: np.ndarray
    standardized: bool = False

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2 or self.y.ndim != 1:
            raise DimensionMismatch("X must be 2-D and y 1-D")
        if self.X.shape[0] != self.y.shape[0]:
            raise DimensionMismatch(f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]} entries")
        if self.X.shape[0] < 2 or self.X.shape[1] < 1:
            raise WrongShape(f"need n >= 2 and p >= 1, got {self.X.shape}")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise ValueError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "Dataset":
        return Dataset(self.X[rows], self.y[rows], standardized=False)


@dataclass(frozen=True)
class StandardizationParams:
    y_mean: float
    x_means: np.ndarray
    x_scales: np.ndarray

    @classmethod
    def identity(cls, p: int) -> "StandardizationParams":
        return cls(0.0, np.zeros(p), np.ones(p))

    @property
    def p(self) -> int:
        return len(self.x_means)

    def transform_X(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.p:
            raise DimensionMismatch(f"expected {self.p} covariate columns, got shape {X.shape}")
        return (X - self.x_means) / self.x_scales


def standardize(raw: Dataset) -> tuple[Dataset, StandardizationParams]:
    """Center ``y`` and scale every column so that ``sum x_ij = 0``, ``sum x_ij^2 = n``."""
    y_mean = float(np.mean(raw.y))
    x_means = np.mean(raw.X, axis=0)
    centered = raw.X - x_means
    x_scales = np.sqrt(np.mean(centered**2, axis=0))
    for j, s in enumerate(x_scales):
        if not s > 1e-12 * max(1.0, float(np.max(np.abs(raw.X[:, j])))):
            raise ConstantColumn(j)
    params = StandardizationParams(y_mean, x_means, x_scales)
    return Dataset(centered / x_scales, raw.y - y_mean, standardized=True), params


def apply_standardization(raw: Dataset, params: StandardizationParams) -> Dataset:
    """Transform ``raw`` with parameters estimated on another (training) set."""
    X = params.transform_X(raw.X)
    return Dataset(X, raw.y - params.y_mean, standardized=True)


def is_standardized(data: Dataset, tol: float = 1e-8) -> bool:
    n = data.n
    if abs(data.y.sum()) > tol * n:
        return False
    if np.any(np.abs(data.X.sum(axis=0)) > tol * n):
        return False
    return bool(np.all(np.abs((data.X**2).sum(axis=0) - n) <= 1e-6 * n))


# --------------------------------------------------------------------------
# simulation designs


@dataclass(frozen=True)
class SimulationSetting:
    """One of the five Monte Carlo designs.

    ``rho`` is the AR(1)-type column correlation ``rho^|i-j|``; setting 5 uses
    the grouped-factor design instead and leaves ``rho`` as None.
    """

    id: int
    n_train: int
    n_test: int
    beta_true: tuple = field(repr=False)
    sigma_true: float
    rho: float | None = None
    n_blocks: int = 0
    block_size: int = 0
    block_noise_var: float = 0.0

    @property
    def p(self) -> int:
        return len(self.beta_true)


SETTINGS = {
    1: SimulationSetting(1, 20, 200, (3.0, 15.0, 7.5, 5.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0), 3.0, rho=0.5),
    2: SimulationSetting(2, 20, 200, (10.0,) * 10, 3.0, rho=0.5),
    3: SimulationSetting(3, 20, 200, (5.0,) + (0.0,) * 7, 2.0, rho=0.5),
    4: SimulationSetting(4, 100, 400, (0.0,) * 10 + (5.0,) * 10 + (0.0,) * 10 + (3.0,) * 10, 3.0, rho=0.95),
    5: SimulationSetting(
        5, 100, 400, (10.0,) * 35 + (0.0,) * 5, 3.0,
        n_blocks=7, block_size=5, block_noise_var=0.01,
    ),
}


def get_setting(setting) -> SimulationSetting:
    if isinstance(setting, SimulationSetting):
        return setting
    try:
        return SETTINGS[int(setting)]
    except (KeyError, ValueError, TypeError):
        raise UnknownSetting(f"unknown simulation setting {setting!r}; valid ids are 1-5") from None


def ar1_correlation(p: int, rho: float) -> np.ndarray:
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def draw_covariates(setting: SimulationSetting, n: int, rng: np.random.Generator) -> np.ndarray:
    p = setting.p
    if setting.rho is not None:
        chol = np.linalg.cholesky(ar1_correlation(p, setting.rho))
        return rng.standard_normal((n, p)) @ chol.T
    grouped = setting.n_blocks * setting.block_size
    X = np.empty((n, p))
    factors = rng.standard_normal((n, setting.n_blocks))
    noise = math.sqrt(setting.block_noise_var) * rng.standard_normal((n, grouped))
    X[:, :grouped] = np.repeat(factors, setting.block_size, axis=1) + noise
    X[:, grouped:] = rng.standard_normal((n, p - grouped))
    return X


def generate_setting(setting, seed: int):
    """Draw one training/test pair.

    Returns
    -------
    train, test : Dataset
        Raw (unstandardized) data.
    beta_true : ndarray
    sigma_true : float
    """
    setting = get_setting(setting)
    rng = np.random.default_rng(seed)
    beta = np.asarray(setting.beta_true, dtype=float)

    def draw(n):
        X = draw_covariates(setting, n, rng)
        y = X @ beta + setting.sigma_true * rng.standard_normal(n)
        return Dataset(X, y)

    train = draw(setting.n_train)
    test = draw(setting.n_test)
    return train, test, beta, setting.sigma_true


# --------------------------------------------------------------------------
# CSV input/output


def _read_rows(path):
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise WrongShape(f"{path} is empty")
    return rows


def _parse_numeric(rows, header):
    values = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        line = i + 2
        if len(row) != len(header):
            raise WrongShape(f"line {line}: expected {len(header)} fields, got {len(row)}")
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise ParseError(line, header[j], cell) from None
            if not math.isfinite(values[i, j]):
                raise ParseError(line, header[j], cell)
    return values


def load_pollution(path) -> Dataset:
    """Read the pollution CSV.

    Layout: one header row, then 60 data rows of 16 numeric fields. The first
    15 columns are the covariates in the order of ``POLLUTION_COLUMNS`` (so
    "variable j" is column j, 1-based) and the last column is the response
    ``mort``. Covariate header names are not checked, only the count and the
    response name.
    """
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    n_expected, p_expected = POLLUTION_SHAPE
    if len(header) != p_expected + 1:
        raise WrongShape(f"expected {p_expected + 1} columns, header has {len(header)}")
    if header[-1].lower() != "mort":
        raise WrongShape(f"last column must be the response 'mort', got {header[-1]!r}")
    values = _parse_numeric(rows[1:], header)
    if values.shape[0] != n_expected:
        raise WrongShape(f"expected {n_expected} observations, got {values.shape[0]}")
    return Dataset(values[:, :-1], values[:, -1])


def default_pollution_path() -> Path | None:
    """Location of the pollution CSV, or None when it is not installed.

    Looks at ``$BRIDGEKIT_POLLUTION_CSV`` first, then ``datasets/pollution.csv``
    inside the package.
    """
    env = os.environ.get(POLLUTION_ENV)
    if env:
        return Path(env)
    bundled = Path(__file__).parent / "datasets" / "pollution.csv"
    return bundled if bundled.exists() else None


def write_dataset_csv(data: Dataset, path) -> None:
    """Dump with header ``y,x1,...,xp`` and 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y"] + [f"x{j + 1}" for j in range(data.p)])
        for yi, row in zip(data.y, data.X):
            writer.writerow([f"{yi:.17g}"] + [f"{v:.17g}" for v in row])


def read_dataset_csv(path) -> Dataset:
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    if header[0] != "y" or len(header) < 2:
        raise WrongShape("dataset dump must start with a 'y' column followed by covariates")
    values = _parse_numeric(rows[1:], header)
    return Dataset(values[:, 1:], values[:, 0])


def load_any_csv(path) -> Dataset:
    """Dispatch on the header: ``y,x1..`` dumps or the pollution layout."""
    rows = _read_rows(path)
    first = rows[0][0].strip() if rows[0] else ""
    if first == "y":
        return read_dataset_csv(path)
    return load_pollution(path)
