"""Competitor estimators: OLS, ridge with leave-one-out CV, lasso and elastic
net with K-fold CV.

The elastic-net penalty is written with the mixing weight on the quadratic
term::

    lam * (alpha * beta^2 / 2 + (1 - alpha) * |beta|)

so ``alpha = 0`` is the lasso and ``alpha = 1`` is ridge. This is the reverse
of the glmnet convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .data import Dataset, StandardizationParams, apply_standardization, standardize
from .estimator import predict_linear
from .exceptions import NonConvergence, NotPositiveDefinite, SingularSystem
from .numerics import solve_spd

METHODS = ("OLS", "Ridge", "Lasso", "ENet")
DEFAULT_ALPHAS = tuple(round(0.1 * i, 1) for i in range(11))
CD_TOL = 1e-7
CD_MAX_SWEEPS = 100_000


@dataclass
class BaselineFit:
    method: str
    beta_hat: np.ndarray
    selected_hyperparams: list = field(default_factory=list)

    @property
    def active_set(self) -> tuple:
        return tuple(int(j) for j in np.flatnonzero(self.beta_hat))

    def predict(self, X_new, params: StandardizationParams) -> np.ndarray:
        return predict_linear(self.beta_hat, X_new, params)


def fit_ols(data: Dataset) -> BaselineFit:
    X, y = data.X, data.y
    try:
        beta = solve_spd(X.T @ X, X.T @ y)
    except NotPositiveDefinite as exc:
        raise SingularSystem("X'X is singular") from exc
    return BaselineFit("OLS", beta)


def ridge_loocv_curve(data: Dataset, lambda_grid) -> np.ndarray:
    """Leave-one-out MSE of ``(X'X + n lam I)^{-1} X'y`` for each lambda.

    Uses the linear-smoother identity ``e_(-i) = e_i / (1 - h_ii)`` through the
    SVD of X.
    """
    X, y = data.X, data.y
    n = data.n
    U, d, _ = np.linalg.svd(X, full_matrices=False)
    Uty = U.T @ y
    lam = np.asarray(lambda_grid, dtype=float)
    shrink = d[None, :] ** 2 / (d[None, :] ** 2 + n * lam[:, None])
    fitted = (shrink * Uty[None, :]) @ U.T
    h = shrink @ (U**2).T
    with np.errstate(divide="ignore", invalid="ignore"):
        loo = (y[None, :] - fitted) / (1.0 - h)
    return np.mean(loo**2, axis=1)


def fit_ridge_loocv(data: Dataset, lambda_grid) -> BaselineFit:
    lam = np.asarray(lambda_grid, dtype=float)
    if lam.size == 0:
        raise ValueError("lambda grid is empty")
    curve = ridge_loocv_curve(data, lam)
    curve = np.where(np.isfinite(curve), curve, np.inf)
    best = float(lam[int(np.argmin(curve))])
    X, y = data.X, data.y
    try:
        beta = solve_spd(X.T @ X + data.n * best * np.eye(data.p), X.T @ y)
    except NotPositiveDefinite as exc:
        raise SingularSystem(f"ridge system singular at lambda={best}") from exc
    return BaselineFit("Ridge", beta, [best])


# --------------------------------------------------------------------------
# coordinate descent


@numba.njit(cache=True)
def _cd_sweep(gram, corr, beta, l1, l2):
    """One cyclic pass in covariance form.

    ``gram`` is ``X'X / n`` and ``corr`` holds ``X'r / n`` for the current
    residual; both ``beta`` and ``corr`` are updated in place. Returns the
    largest absolute coefficient change.
    """
    p = gram.shape[0]
    biggest = 0.0
    for j in range(p):
        old = beta[j]
        rho = corr[j] + gram[j, j] * old
        if rho > l1:
            new = (rho - l1) / (gram[j, j] + l2)
        elif rho < -l1:
            new = (rho + l1) / (gram[j, j] + l2)
        else:
            new = 0.0
        if new != old:
            diff = new - old
            for k in range(p):
                corr[k] -= gram[k, j] * diff
            beta[j] = new
            if abs(diff) > biggest:
                biggest = abs(diff)
    return biggest


def enet_objective(X, y, beta, lam, alpha) -> float:
    """``(1/2n)||y - X beta||^2 + lam (alpha beta^2/2 + (1-alpha)|beta|)``."""
    n = len(y)
    r = y - X @ beta
    return float(r @ r / (2 * n) + lam * (alpha * beta @ beta / 2 + (1 - alpha) * np.sum(np.abs(beta))))


def enet_coordinate_descent(X, y, lam: float, alpha: float, beta0=None,
                            tol: float = CD_TOL, max_sweeps: int = CD_MAX_SWEEPS) -> np.ndarray:
    """Minimize the elastic-net objective by cyclic coordinate descent."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    gram = np.ascontiguousarray(X.T @ X / n)
    corr = X.T @ (y - X @ beta) / n
    l1 = lam * (1.0 - alpha)
    l2 = lam * alpha
    for _ in range(max_sweeps):
        if _cd_sweep(gram, corr, beta, l1, l2) < tol:
            return beta
    raise NonConvergence(f"coordinate descent did not converge in {max_sweeps} sweeps (lam={lam}, alpha={alpha})")


def enet_path(X, y, lambdas, alpha: float) -> np.ndarray:
    """Solutions along a decreasing lambda list with warm starts; (L, p)."""
    out = np.empty((len(lambdas), X.shape[1]))
    beta = None
    for i, lam in enumerate(lambdas):
        beta = enet_coordinate_descent(X, y, lam, alpha, beta)
        out[i] = beta
    return out


def fold_ids(n: int, folds: int, seed) -> np.ndarray:
    """Fold label per observation: seeded shuffle, then contiguous blocks."""
    if n < folds:
        raise ValueError(f"need at least {folds} observations for {folds}-fold CV")
    perm = np.random.default_rng(seed).permutation(n)
    ids = np.empty(n, dtype=int)
    for k, block in enumerate(np.array_split(perm, folds)):
        ids[block] = k
    return ids


def enet_cv_curve(data: Dataset, lambda_grid, alpha_grid, folds: int = 5, seed=0) -> np.ndarray:
    """Mean validation MSE, shape (len(alpha_grid), len(lambda_grid)).

    Each training fold is re-standardized and its parameters applied to the
    held-out fold.
    """
    lam = np.sort(np.asarray(lambda_grid, dtype=float))[::-1]
    ids = fold_ids(data.n, folds, seed)
    err = np.zeros((len(alpha_grid), len(lam)))
    for k in range(folds):
        train, params = standardize(data.subset(ids != k))
        held = data.subset(ids == k)
        for a, alpha in enumerate(alpha_grid):
            path = enet_path(train.X, train.y, lam, alpha)
            pred = params.transform_X(held.X) @ path.T + params.y_mean
            err[a] += np.sum((held.y[:, None] - pred) ** 2, axis=0)
    return err / data.n


def fit_enet_cv(data: Dataset, lambda_grid, alpha_grid=DEFAULT_ALPHAS, folds: int = 5, seed=0,
                method: str = "ENet") -> BaselineFit:
    """Elastic net with (lambda, alpha) chosen by K-fold CV, refitted on all data.

    Ties go to the first entry in (alpha, decreasing lambda) order.
    """
    if len(lambda_grid) == 0 or len(alpha_grid) == 0:
        raise ValueError("grids must be nonempty")
    lam = np.sort(np.asarray(lambda_grid, dtype=float))[::-1]
    curve = enet_cv_curve(data, lam, alpha_grid, folds, seed)
    a, i = np.unravel_index(int(np.argmin(curve)), curve.shape)
    alpha = float(alpha_grid[a])
    # refit along the path for warm starts
    beta = enet_path(data.X, data.y, lam[: i + 1], alpha)[-1]
    return BaselineFit(method, beta, [float(lam[i]), alpha])


def fit_lasso_cv(data: Dataset, lambda_grid, folds: int = 5, seed=0) -> BaselineFit:
    fit = fit_enet_cv(data, lambda_grid, (0.0,), folds, seed, method="Lasso")
    fit.selected_hyperparams = fit.selected_hyperparams[:1]
    return fit


def fit_baseline(method: str, data: Dataset, lambda_grid, seed=0) -> BaselineFit:
    if method == "OLS":
        return fit_ols(data)
    if method == "Ridge":
        return fit_ridge_loocv(data, lambda_grid)
    if method == "Lasso":
        return fit_lasso_cv(data, lambda_grid, seed=seed)
    if method == "ENet":
        return fit_enet_cv(data, lambda_grid, seed=seed)
    raise ValueError(f"unknown baseline {method!r}; valid: {', '.join(METHODS)}")


__all__ = [
    "BaselineFit", "METHODS", "fit_ols", "fit_ridge_loocv", "fit_lasso_cv", "fit_enet_cv",
    "fit_baseline", "enet_coordinate_descent", "enet_objective", "apply_standardization",
]
