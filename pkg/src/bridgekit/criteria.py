"""Selection criteria for bridge fits.

Seven criteria are supported: GBIC (Laplace approximation to the partial
marginal likelihood under the bridge prior), the hat-matrix based mAIC,
mBIC, AICc, CV and GCV, and the bootstrap EIC. Every scalar function takes a
single ``BridgeFit``; ``grid_scores`` / ``grid_eic`` evaluate the same
formulas for a whole ``GridFit`` at once.

Invalid values (non-positive-definite GBIC Hessian, a pole in a
denominator, a failed solve) are reported with ``valid=False`` and rank as
``+inf`` in selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .data import Dataset, standardize
from .estimator import (
    DEFAULT_CONFIG,
    BridgeFit,
    FitConfig,
    GridFit,
    fit_bridge,
    gaussian_loglik,
    lqa_batch,
    log_likelihood,
    masked_systems,
    ridge_init,
)
from .exceptions import BridgeKitError, NotPositiveDefinite, SingularSystem
from .numerics import log_det_signed, solve_spd
from .penalty import Hyperparams, lqa_weights

CRITERIA = ("GBIC", "mAIC", "mBIC", "AICc", "CV", "GCV", "EIC")
DETERMINISTIC = CRITERIA[:-1]
_BY_LOWER = {c.lower(): c for c in CRITERIA}

#: fraction of bootstrap refits that may fail before EIC is declared invalid
EIC_MAX_DROP = 0.2
AICC_POLE_RTOL = 1e-9


def criterion_kind(name: str) -> str:
    """Canonical spelling of a criterion name (case-insensitive)."""
    try:
        return _BY_LOWER[name.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown criterion {name!r}; valid names: {', '.join(CRITERIA)}") from None


@dataclass(frozen=True)
class CriterionValue:
    kind: str
    value: float
    valid: bool
    note: str | None = None

    @property
    def score(self) -> float:
        """Value used for ranking; invalid entries rank last."""
        return self.value if self.valid else math.inf


def _make(kind, value, note=None):
    value = float(value)
    if not math.isfinite(value):
        return CriterionValue(kind, value, False, note or "non-finite value")
    return CriterionValue(kind, value, note is None, note)


@dataclass
class HatMatrixInfo:
    S: np.ndarray
    trace: float

    @property
    def diag(self) -> np.ndarray:
        return np.diag(self.S)


def _active_weights(fit: BridgeFit, hp: Hyperparams, n: int):
    idx = np.asarray(fit.active_set, dtype=int)
    absb = np.abs(fit.beta_hat[idx])
    return idx, lqa_weights(absb, hp.lam, hp.q, fit.sigma2_hat, n)


def hat_matrix(fit: BridgeFit, data: Dataset, hp: Hyperparams) -> HatMatrixInfo:
    """``S = X_A (X_A'X_A + Sigma)^{-1} X_A'`` with the LQA penalty matrix at the fit."""
    n = data.n
    idx, w = _active_weights(fit, hp, n)
    if idx.size == 0:
        return HatMatrixInfo(np.zeros((n, n)), 0.0)
    XA = data.X[:, idx]
    try:
        inner = solve_spd(XA.T @ XA + np.diag(w), XA.T)
    except NotPositiveDefinite as exc:
        raise SingularSystem("hat matrix system is singular") from exc
    S = XA @ inner
    return HatMatrixInfo(S, float(np.trace(S)))


def gbic_matrix(fit: BridgeFit, data: Dataset, hp: Hyperparams) -> np.ndarray:
    """The (|A|+1)-square matrix J: negative Hessian of the scaled log posterior
    in (beta_A, sigma2) at the fit."""
    n = data.n
    idx = np.asarray(fit.active_set, dtype=int)
    s2 = fit.sigma2_hat
    q = hp.q
    XA = data.X[:, idx]
    resid = data.y - data.X @ fit.beta_hat
    r = len(idx)
    J = np.empty((r + 1, r + 1))
    K = np.abs(fit.beta_hat[idx]) ** (q - 2.0) / 2.0
    J[:r, :r] = XA.T @ XA + np.diag(n * hp.lam * s2 * q * (q - 1.0) * K)
    J[:r, r] = J[r, :r] = XA.T @ resid / s2
    J[r, r] = n / (2.0 * s2)
    return J / (n * s2)


def gbic_value(n, sigma2, n_active, logdet_J, lam, q, penalty_sum):
    """GBIC from its ingredients; broadcasts over arrays."""
    r = n_active
    return (
        n * math.log(2.0 * math.pi) + n * np.log(sigma2) + n
        - (r + 1) * math.log(2.0 * math.pi / n) + logdet_J
        - 2.0 * r * np.log(q) + 2.0 * r * (1.0 + 1.0 / q) * math.log(2.0)
        - (2.0 * r / q) * np.log(n * lam) + 2.0 * r * gammaln(1.0 / q)
        + n * lam * penalty_sum
    )


def _is_positive_definite(J) -> bool:
    return bool(np.all(np.isfinite(J))) and bool(np.linalg.eigvalsh(J)[0] > 0.0)


def gbic(fit: BridgeFit, data: Dataset, hp: Hyperparams) -> CriterionValue:
    n = data.n
    if not fit.sigma2_hat > 0:
        return CriterionValue("GBIC", math.nan, False, "zero residual variance")
    J = gbic_matrix(fit, data, hp)
    sign, logdet = log_det_signed(J)
    if sign <= 0 or not _is_positive_definite(J):
        return CriterionValue("GBIC", math.nan, False, "J is not positive definite")
    idx = list(fit.active_set)
    pen = float(np.sum(np.abs(fit.beta_hat[idx]) ** hp.q))
    return _make("GBIC", gbic_value(n, fit.sigma2_hat, len(idx), logdet, hp.lam, hp.q, pen))


def _neg2ll(fit, data):
    return -2.0 * log_likelihood(fit, data)


def maic_from(neg2ll, trace):
    return neg2ll + 2.0 * trace


def mbic_from(neg2ll, trace, n):
    return neg2ll + trace * math.log(n)


def aicc_from(neg2ll, trace, n):
    """AICc; NaN at or past the pole ``tr S = n - 2`` (within ``AICC_POLE_RTOL * n``)."""
    denom = n - np.asarray(trace, dtype=float) - 2.0
    ok = denom > AICC_POLE_RTOL * n
    with np.errstate(divide="ignore", invalid="ignore"):
        value = neg2ll + 2.0 * n * (trace + 1.0) / np.where(ok, denom, 1.0)
    return np.where(ok, value, np.nan)


def cv_from(resid, s_diag):
    one_minus = 1.0 - s_diag
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.mean((resid / one_minus) ** 2, axis=-1)
    return np.where(np.all(one_minus > 0, axis=-1), value, np.nan)


def gcv_from(resid, trace, n):
    one_minus = 1.0 - trace / n
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.mean(resid**2, axis=-1) / one_minus**2
    return np.where(one_minus > 0, value, np.nan)


def _hat_or_invalid(kind, fit, data, hp):
    try:
        return hat_matrix(fit, data, hp), None
    except SingularSystem as exc:
        return None, CriterionValue(kind, math.nan, False, str(exc))


def maic(fit: BridgeFit, data: Dataset, hp: Hyperparams) -> CriterionValue:
    H, bad = _hat_or_invalid("mAIC", fit, data, hp)
    return bad or _make("mAIC", maic_from(_neg2ll(fit, data), H.trace))


def mbic(fit: BridgeFit, data: Dataset, hp: Hyperparams) -> CriterionValue:
    H, bad = _hat_or_invalid("mBIC", fit, data, hp)
    return bad or _make("mBIC", mbic_from(_neg2ll(fit, data), H.trace, data.n))


def aicc(fit: BridgeFit, data: Dataset, hp: Hyperparams) -> CriterionValue:
    H, bad = _hat_or_invalid("AICc", fit, data, hp)
    if bad:
        return bad
    value = float(aicc_from(_neg2ll(fit, data), H.trace, data.n))
    if math.isnan(value):
        return CriterionValue("AICc", math.nan, False, "n - tr S - 2 <= 0")
    return _make("AICc", value)


def cv_score(fit: BridgeFit, data: Dataset, hp: Hyperparams) -> CriterionValue:
    H, bad = _hat_or_invalid("CV", fit, data, hp)
    if bad:
        return bad
    value = float(cv_from(data.y - data.X @ fit.beta_hat, H.diag))
    if math.isnan(value):
        return CriterionValue("CV", math.nan, False, "some s_ii >= 1")
    return _make("CV", value)


def gcv_score(fit: BridgeFit, data: Dataset, hp: Hyperparams) -> CriterionValue:
    H, bad = _hat_or_invalid("GCV", fit, data, hp)
    if bad:
        return bad
    value = float(gcv_from(data.y - data.X @ fit.beta_hat, H.trace, data.n))
    if math.isnan(value):
        return CriterionValue("GCV", math.nan, False, "tr S >= n")
    return _make("GCV", value)


# --------------------------------------------------------------------------
# EIC


def bootstrap_indices(n: int, B: int, seed) -> np.ndarray:
    """(B, n) row indices for pair resampling."""
    return np.random.default_rng(seed).integers(0, n, size=(B, n))


def _loglik_rows(y, pred, sigma2):
    resid = y - pred
    return gaussian_loglik(np.sum(resid**2, axis=-1), sigma2, y.shape[-1])


def eic_bias_terms(data: Dataset, lam, q, indices, cfg: FitConfig = DEFAULT_CONFIG):
    """Per-replicate optimism ``sum_i log f(boot) - sum_i log f(orig)``.

    Returns a (B, G) array for the G points ``(lam[g], q[g])``; rows for
    replicates whose refit failed are NaN.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    G = len(lam)
    terms = np.full((len(indices), G), np.nan)
    for b, rows in enumerate(indices):
        try:
            boot, params = standardize(data.subset(rows))
            start = ridge_init(boot.X.T @ boot.X, boot.X.T @ boot.y, boot.n, cfg.ridge_init_gamma)
        except (BridgeKitError, np.linalg.LinAlgError):
            continue
        beta, sigma2, _, _, _, ok = lqa_batch(
            boot.X, boot.y, lam, q, np.tile(start, (G, 1)), np.ones(G), cfg
        )
        fitted_boot = beta @ boot.X.T
        pred_orig = params.transform_X(data.X) @ beta.T + params.y_mean
        with np.errstate(divide="ignore", invalid="ignore"):
            own = _loglik_rows(boot.y[None, :], fitted_boot, sigma2)
            orig = _loglik_rows(data.y[None, :], pred_orig.T, sigma2)
        t = own - orig
        t[~ok | ~np.isfinite(t)] = np.nan
        terms[b] = t
    return terms


def _eic_from_terms(neg2ll, terms):
    """EIC values and validity from (B, G) bias terms."""
    B = terms.shape[0]
    kept = np.sum(np.isfinite(terms), axis=0)
    with np.errstate(invalid="ignore"):
        bias = 2.0 * np.nansum(terms, axis=0) / np.maximum(kept, 1)
    valid = kept >= (1.0 - EIC_MAX_DROP) * B
    return neg2ll + bias, valid & np.isfinite(neg2ll), kept


def eic(fit: BridgeFit, data: Dataset, hp: Hyperparams, B: int = 100, seed=0,
        cfg: FitConfig = DEFAULT_CONFIG, indices=None) -> CriterionValue:
    """Bootstrap extended information criterion.

    Pairs ``(y_i, x_i)`` are resampled with replacement, each resample is
    re-standardized and refitted at the same (lambda, q), and the average
    log-likelihood optimism (summed over observations) is added to
    ``-2 log L``. ``indices`` overrides the resampling with explicit (B, n)
    row indices.
    """
    if indices is None:
        if B < 1:
            raise ValueError("B must be at least 1")
        indices = bootstrap_indices(data.n, B, seed)
    terms = eic_bias_terms(data, [hp.lam], [hp.q], np.asarray(indices), cfg)
    value, valid, kept = _eic_from_terms(_neg2ll(fit, data), terms)
    if not valid[0]:
        return CriterionValue("EIC", float(value[0]), False, f"only {kept[0]} of {len(indices)} refits succeeded")
    return _make("EIC", value[0])


# --------------------------------------------------------------------------
# whole-grid evaluation


@dataclass
class GridScores:
    """Criterion values for every point of a GridFit, keyed by kind."""

    values: dict
    valid: dict
    trace: np.ndarray

    def criterion_value(self, kind: str, g: int) -> CriterionValue:
        v = float(self.values[kind][g])
        if self.valid[kind][g]:
            return CriterionValue(kind, v, True)
        return CriterionValue(kind, v, False, "invalid")


def grid_scores(data: Dataset, gf: GridFit, kinds=DETERMINISTIC) -> GridScores:
    """Deterministic criteria for every grid point, sharing one set of solves."""
    X, y = data.X, data.y
    n, p = X.shape
    G = len(gf)
    kinds = [criterion_kind(k) for k in kinds]
    XtX = X.T @ X
    active = gf.active & gf.ok[:, None]
    sigma2 = np.where(gf.ok, gf.sigma2, np.nan)
    beta = np.where(gf.ok[:, None], gf.beta, 0.0)
    absb = np.where(active, np.abs(beta), 1.0)
    n_active = active.sum(axis=1)
    resid = y[None, :] - beta @ X.T
    with np.errstate(divide="ignore", invalid="ignore"):
        neg2ll = -2.0 * gaussian_loglik(np.sum(resid**2, axis=1), sigma2, n)
    values, valid = {}, {}

    if set(kinds) & {"mAIC", "mBIC", "AICc", "CV", "GCV"}:
        w = lqa_weights(absb, gf.lam[:, None], gf.q[:, None], sigma2[:, None], n)
        w = np.where(np.isfinite(w), w, 1.0)
        A, _ = masked_systems(XtX, np.zeros(p), active, w)
        Xm = np.where(active[:, None, :], X[None, :, :], 0.0)
        try:
            inner = np.linalg.solve(A, np.transpose(Xm, (0, 2, 1)))
        except np.linalg.LinAlgError:
            inner = np.full((G, p, n), np.nan)
            for g in range(G):
                try:
                    inner[g] = np.linalg.solve(A[g], Xm[g].T)
                except np.linalg.LinAlgError:
                    pass
        s_diag = np.einsum("gij,gji->gi", Xm, inner)
        trace = s_diag.sum(axis=1)
        ok = gf.ok & np.isfinite(trace)
        table = {
            "mAIC": lambda: maic_from(neg2ll, trace),
            "mBIC": lambda: mbic_from(neg2ll, trace, n),
            "AICc": lambda: aicc_from(neg2ll, trace, n),
            "CV": lambda: cv_from(resid, s_diag),
            "GCV": lambda: gcv_from(resid, trace, n),
        }
        for k in kinds:
            if k in table:
                values[k] = table[k]()
                valid[k] = ok & np.isfinite(values[k])
    else:
        trace = np.full(G, np.nan)

    if "GBIC" in kinds:
        values["GBIC"], valid["GBIC"] = _grid_gbic(X, y, gf, active, beta, sigma2, resid, n_active)
    return GridScores(values, valid, trace)


def _grid_gbic(X, y, gf, active, beta, sigma2, resid, n_active):
    n, p = X.shape
    G = len(gf)
    q = gf.q
    lam = gf.lam
    absb = np.where(active, np.abs(beta), 1.0)
    s2 = sigma2[:, None]
    K = absb ** (q[:, None] - 2.0) / 2.0
    diag_extra = np.where(active, n * lam[:, None] * s2 * q[:, None] * (q[:, None] - 1.0) * K, 0.0)

    # inactive coordinates become identity rows/columns so |J| is unaffected
    J = np.zeros((G, p + 1, p + 1))
    both = active[:, :, None] & active[:, None, :]
    J[:, :p, :p] = np.where(both, X.T @ X, 0.0)
    J[:, np.arange(p), np.arange(p)] += diag_extra
    cross = np.where(active, (resid @ X) / s2, 0.0)
    J[:, :p, p] = cross
    J[:, p, :p] = cross
    J[:, p, p] = n / (2.0 * sigma2)
    with np.errstate(divide="ignore", invalid="ignore"):
        J /= (n * sigma2)[:, None, None]
    inactive = ~active
    gi, ji = np.nonzero(inactive)
    J[gi, ji, ji] = 1.0

    finite = np.all(np.isfinite(J), axis=(1, 2))
    Jsafe = np.where(finite[:, None, None], J, np.eye(p + 1))
    sign, logdet = log_det_signed(Jsafe)
    min_eig = np.linalg.eigvalsh(Jsafe)[:, 0]
    pen = np.sum(np.where(active, absb ** q[:, None], 0.0), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = gbic_value(n, sigma2, n_active, logdet, lam, q, pen)
    valid = gf.ok & finite & (sign > 0) & (min_eig > 0) & (sigma2 > 0) & np.isfinite(value)
    return value, valid


def grid_eic(data: Dataset, gf: GridFit, B: int = 100, seed=0,
             cfg: FitConfig = DEFAULT_CONFIG, indices=None):
    """EIC at every grid point, using the same B resamples for all points."""
    if indices is None:
        indices = bootstrap_indices(data.n, B, seed)
    resid = data.y[None, :] - gf.beta @ data.X.T
    with np.errstate(divide="ignore", invalid="ignore"):
        neg2ll = -2.0 * gaussian_loglik(np.sum(resid**2, axis=1), gf.sigma2, data.n)
    terms = eic_bias_terms(data, gf.lam, gf.q, np.asarray(indices), cfg)
    value, valid, _ = _eic_from_terms(neg2ll, terms)
    return value, valid & gf.ok


SCALAR_CRITERIA = {
    "GBIC": gbic,
    "mAIC": maic,
    "mBIC": mbic,
    "AICc": aicc,
    "CV": cv_score,
    "GCV": gcv_score,
}


def evaluate(kind: str, fit: BridgeFit, data: Dataset, hp: Hyperparams, **eic_kwargs) -> CriterionValue:
    kind = criterion_kind(kind)
    if kind == "EIC":
        return eic(fit, data, hp, **eic_kwargs)
    return SCALAR_CRITERIA[kind](fit, data, hp)
