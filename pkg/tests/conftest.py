import csv

import numpy as np
import pytest

from bridgekit.data import POLLUTION_COLUMNS, Dataset, standardize


def make_data(n, p, seed, beta=None, noise=1.0, standardized=True):
    """Small Gaussian regression problem; standardized by default."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    if beta is None:
        beta = rng.standard_normal(p) * 2.0
    y = X @ np.asarray(beta, dtype=float) + noise * rng.standard_normal(n)
    raw = Dataset(X, y)
    return standardize(raw)[0] if standardized else raw


def write_fake_pollution(path, n_rows=60, seed=0, bad_cell=None):
    """A synthetic file in the pollution layout (NOT the real data)."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n_rows, 15)) * 10 + 50
    y = 900 + X[:, [0, 7, 8, 13]] @ np.array([2.0, 0.5, 3.0, 1.0]) + rng.standard_normal(n_rows) * 20
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(POLLUTION_COLUMNS)
        for i in range(n_rows):
            row = [f"{v:.6g}" for v in X[i]] + [f"{y[i]:.6g}"]
            if bad_cell is not None and bad_cell[0] == i:
                row[bad_cell[1]] = "abc"
            w.writerow(row)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def small_data():
    return make_data(30, 4, seed=3, beta=[3.0, -2.0, 0.0, 0.5])


@pytest.fixture
def fake_pollution(tmp_path):
    return write_fake_pollution(tmp_path / "pollution_fake.csv")
