"""Bridge regression fitted by local quadratic approximation (LQA).

Each LQA step replaces ``|beta_j|^q`` with a quadratic touching it at the
current iterate, which turns the update into a weighted ridge solve on the
active coordinates, followed by the closed-form variance update.

``fit_bridge`` runs one (lambda, q) point. ``fit_grid`` runs the same
iteration for a whole grid at once by stacking the per-point linear systems;
inactive coordinates are masked to identity rows so every system keeps the
full ``p x p`` shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, StandardizationParams
from .exceptions import DimensionMismatch, NotPositiveDefinite, SingularSystem
from .numerics import solve_spd
from .penalty import Hyperparams, bridge_penalty_term, lqa_weight, lqa_weights


@dataclass(frozen=True)
class FitConfig:
    ridge_init_gamma: float = 1e-5
    delta: float = 1e-5
    max_iters: int = 500
    prune_threshold: float = 1e-8

    def __post_init__(self):
        if min(self.ridge_init_gamma, self.delta, self.prune_threshold) <= 0 or self.max_iters < 1:
            raise ValueError("FitConfig values must be positive and max_iters >= 1")


DEFAULT_CONFIG = FitConfig()


@dataclass
class BridgeFit:
    beta_hat: np.ndarray
    sigma2_hat: float
    active_set: tuple
    iterations: int
    converged: bool
    final_step_norm: float
    penalized_loglik: float
    hp: Hyperparams | None = None

    @property
    def n_active(self) -> int:
        return len(self.active_set)


def ridge_init(XtX: np.ndarray, Xty: np.ndarray, n: int, gamma: float) -> np.ndarray:
    """Starting point ``(X'X + n gamma I)^{-1} X'y``."""
    return solve_spd(XtX + n * gamma * np.eye(len(Xty)), Xty)


def gaussian_loglik(rss, sigma2, n: int):
    return -0.5 * n * np.log(2.0 * math.pi * sigma2) - rss / (2.0 * sigma2)


def _penalized_loglik(rss, sigma2, beta, hp, n):
    return float(gaussian_loglik(rss, sigma2, n)) - bridge_penalty_term(beta, hp, n)


def fit_bridge(data: Dataset, hp: Hyperparams, cfg: FitConfig = DEFAULT_CONFIG,
               init: tuple | None = None) -> BridgeFit:
    """Fit one bridge model by LQA.

    Parameters
    ----------
    data : Dataset
        Standardized data.
    hp : Hyperparams
    cfg : FitConfig
    init : (beta0, sigma2_0), optional
        Starting point; the default is the near-OLS ridge start with
        ``sigma2_0 = 1``.

    Coefficients that drop below ``cfg.prune_threshold`` are set to zero and
    never re-enter during this fit. If every coefficient is pruned the null
    model is returned.
    """
    X, y = data.X, data.y
    n, p = X.shape
    XtX = X.T @ X
    Xty = X.T @ y
    if init is None:
        try:
            beta = ridge_init(XtX, Xty, n, cfg.ridge_init_gamma)
        except NotPositiveDefinite as exc:
            raise SingularSystem(str(exc)) from exc
        sigma2 = 1.0
    else:
        beta = np.array(init[0], dtype=float)
        sigma2 = float(init[1])
        if beta.shape != (p,):
            raise DimensionMismatch(f"initial beta has shape {beta.shape}, expected ({p},)")
    active = np.abs(beta) >= cfg.prune_threshold
    beta = np.where(active, beta, 0.0)

    converged = False
    step = math.inf
    it = 0
    for it in range(1, cfg.max_iters + 1):
        idx = np.flatnonzero(active)
        new = np.zeros(p)
        if idx.size:
            w = lqa_weight(beta[idx], hp, sigma2, n, cfg.prune_threshold)
            A = XtX[np.ix_(idx, idx)] + np.diag(np.atleast_1d(w))
            try:
                new[idx] = solve_spd(A, Xty[idx])
            except NotPositiveDefinite as exc:
                raise SingularSystem(f"LQA system is singular at {hp}") from exc
        pruned = active & (np.abs(new) < cfg.prune_threshold)
        new[pruned] = 0.0
        active &= ~pruned
        resid = y - X @ new
        sigma2 = float(resid @ resid) / n
        step = float(np.linalg.norm(new - beta))
        beta = new
        if step < cfg.delta:
            converged = True
            break

    rss = float(np.sum((y - X @ beta) ** 2))
    sigma2 = rss / n
    return BridgeFit(
        beta_hat=beta,
        sigma2_hat=sigma2,
        active_set=tuple(int(j) for j in np.flatnonzero(beta)),
        iterations=it,
        converged=converged,
        final_step_norm=step,
        penalized_loglik=_penalized_loglik(rss, sigma2, beta, hp, n),
        hp=hp,
    )


def predict_linear(beta, X_new, params: StandardizationParams) -> np.ndarray:
    """Raw-scale predictions from standardized-scale coefficients."""
    beta = np.asarray(beta, dtype=float)
    if params.p != beta.shape[0]:
        raise DimensionMismatch(f"coefficients have length {beta.shape[0]}, params cover {params.p} columns")
    return params.transform_X(X_new) @ beta + params.y_mean


def predict(fit: BridgeFit, X_new, params: StandardizationParams) -> np.ndarray:
    return predict_linear(fit.beta_hat, X_new, params)


def log_likelihood(fit: BridgeFit, data: Dataset) -> float:
    """Gaussian log-likelihood of ``data`` at ``(beta_hat, sigma2_hat)``."""
    if data.p != fit.beta_hat.shape[0]:
        raise DimensionMismatch("dataset and fit disagree on p")
    resid = data.y - data.X @ fit.beta_hat
    return float(gaussian_loglik(float(resid @ resid), fit.sigma2_hat, data.n))


# --------------------------------------------------------------------------
# batched grid fitting


@dataclass
class GridFit:
    """Fits for every point of a (q, lambda) grid on one dataset.

    Arrays are indexed by grid point ``g``; ``ok[g]`` is False when the LQA
    system was singular at that point.
    """

    lam: np.ndarray
    q: np.ndarray
    beta: np.ndarray
    sigma2: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    step: np.ndarray
    ok: np.ndarray

    def __len__(self):
        return len(self.lam)

    @property
    def active(self) -> np.ndarray:
        return self.beta != 0.0

    def hp(self, g: int) -> Hyperparams:
        return Hyperparams(float(self.lam[g]), float(self.q[g]))

    def fit_at(self, g: int, data: Dataset) -> BridgeFit:
        hp = self.hp(g)
        beta = self.beta[g].copy()
        rss = float(np.sum((data.y - data.X @ beta) ** 2))
        return BridgeFit(
            beta_hat=beta,
            sigma2_hat=float(self.sigma2[g]),
            active_set=tuple(int(j) for j in np.flatnonzero(beta)),
            iterations=int(self.iterations[g]),
            converged=bool(self.converged[g]),
            final_step_norm=float(self.step[g]),
            penalized_loglik=_penalized_loglik(rss, float(self.sigma2[g]), beta, hp, data.n),
            hp=hp,
        )


def masked_systems(XtX, Xty, active, weights):
    """Stack of LQA systems with inactive coordinates replaced by identity rows.

    ``active`` and ``weights`` are (G, p); returns ``A`` (G, p, p) and rhs (G, p).
    The solution of each system is zero on inactive coordinates.
    """
    p = XtX.shape[0]
    both = active[:, :, None] & active[:, None, :]
    A = np.where(both, XtX, 0.0)
    diag = np.where(active, weights, 1.0)
    A[:, np.arange(p), np.arange(p)] += diag
    rhs = np.where(active, Xty, 0.0)
    return A, rhs


def _solve_stack(A, rhs):
    """Batched solve; singular members come back as NaN rows."""
    try:
        return np.linalg.solve(A, rhs[..., None])[..., 0], np.ones(len(A), dtype=bool)
    except np.linalg.LinAlgError:
        out = np.full(rhs.shape, np.nan)
        good = np.ones(len(A), dtype=bool)
        for g in range(len(A)):
            try:
                out[g] = np.linalg.solve(A[g], rhs[g])
            except np.linalg.LinAlgError:
                good[g] = False
        return out, good


def lqa_batch(X, y, lam, q, beta0, sigma2_0, cfg: FitConfig = DEFAULT_CONFIG):
    """Run LQA for G (lambda, q) points in lockstep.

    ``lam``, ``q``, ``sigma2_0`` are (G,), ``beta0`` is (G, p). Points drop out
    of the working set once converged.
    """
    n, p = X.shape
    XtX = X.T @ X
    Xty = X.T @ y
    lam = np.asarray(lam, dtype=float)
    q = np.asarray(q, dtype=float)
    G = len(lam)

    beta = np.array(beta0, dtype=float)
    active = np.abs(beta) >= cfg.prune_threshold
    beta[~active] = 0.0
    sigma2 = np.array(sigma2_0, dtype=float)
    iters = np.zeros(G, dtype=int)
    converged = np.zeros(G, dtype=bool)
    step = np.full(G, np.inf)
    ok = np.ones(G, dtype=bool)

    todo = np.arange(G)
    for it in range(1, cfg.max_iters + 1):
        if todo.size == 0:
            break
        b = beta[todo]
        m = active[todo]
        absb = np.where(m, np.abs(b), 1.0)
        w = lqa_weights(absb, lam[todo, None], q[todo, None], sigma2[todo, None], n)
        A, rhs = masked_systems(XtX, Xty, m, w)
        new, good = _solve_stack(A, rhs)
        new = np.where(m, new, 0.0)
        pruned = m & (np.abs(new) < cfg.prune_threshold)
        new[pruned] = 0.0
        m &= ~pruned
        resid = y[None, :] - new @ X.T
        s2 = np.einsum("gi,gi->g", resid, resid) / n
        st = np.linalg.norm(new - b, axis=1)

        beta[todo] = new
        active[todo] = m
        sigma2[todo] = s2
        step[todo] = st
        iters[todo] = it
        if not good.all():
            ok[todo[~good]] = False
        done = (st < cfg.delta) | ~good
        converged[todo[done & good]] = True
        todo = todo[~done]

    resid = y[None, :] - beta @ X.T
    sigma2 = np.einsum("gi,gi->g", resid, resid) / n
    return beta, sigma2, iters, converged, step, ok


def fit_grid(data: Dataset, lambdas, qs, cfg: FitConfig = DEFAULT_CONFIG,
             warm_start: bool = False) -> GridFit:
    """Fit every (lambda, q) combination; q varies slowest.

    Cold mode starts every point from the ridge start of ``fit_bridge``.
    Warm mode walks each q-slice down the lambda list, starting each point
    from the previous solution (pruned entries refilled from the ridge
    start, all-pruned solutions replaced by it).
    """
    X, y = data.X, data.y
    n, p = X.shape
    lambdas = np.asarray(lambdas, dtype=float)
    qs = np.asarray(qs, dtype=float)
    lam = np.tile(lambdas, len(qs))
    q = np.repeat(qs, len(lambdas))
    try:
        start = ridge_init(X.T @ X, X.T @ y, n, cfg.ridge_init_gamma)
    except NotPositiveDefinite as exc:
        raise SingularSystem(str(exc)) from exc

    if not warm_start:
        G = len(lam)
        out = lqa_batch(X, y, lam, q, np.tile(start, (G, 1)), np.ones(G), cfg)
        return GridFit(lam, q, *out)

    L, Q = len(lambdas), len(qs)
    beta = np.empty((Q, L, p))
    sigma2 = np.empty((Q, L))
    iters = np.empty((Q, L), dtype=int)
    conv = np.empty((Q, L), dtype=bool)
    step = np.empty((Q, L))
    ok = np.empty((Q, L), dtype=bool)
    b0 = np.tile(start, (Q, 1))
    s0 = np.ones(Q)
    for i in range(L):
        res = lqa_batch(X, y, np.full(Q, lambdas[i]), qs, b0, s0, cfg)
        beta[:, i], sigma2[:, i], iters[:, i], conv[:, i], step[:, i], ok[:, i] = res
        prev = res[0]
        empty = ~np.any(prev != 0.0, axis=1) | ~res[5]
        b0 = np.where(prev != 0.0, prev, start)
        b0[empty] = start
        s0 = np.where(empty, 1.0, res[1])
    return GridFit(
        lam, q, beta.reshape(-1, p), sigma2.ravel(), iters.ravel(),
        conv.ravel(), step.ravel(), ok.ravel(),
    )
