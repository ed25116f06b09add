"""Bridge penalty, its local quadratic surrogate, and the bridge prior."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .exceptions import DegenerateCoefficient

#: coefficients with magnitude below this are treated as exactly zero
PRUNE_THRESHOLD = 1e-8


@dataclass(frozen=True, order=True)
class Hyperparams:
    """The (lambda, q) pair being tuned."""

    lam: float
    q: float

    def __post_init__(self):
        for name in ("lam", "q"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")


def bridge_penalty_term(beta, hp: Hyperparams, n: int) -> float:
    """``(n * lam / 2) * sum_j |beta_j|^q``."""
    beta = np.asarray(beta, dtype=float)
    return 0.5 * n * hp.lam * float(np.sum(np.abs(beta) ** hp.q))


def lqa_weight(beta0, hp: Hyperparams, sigma2, n: int, threshold: float = PRUNE_THRESHOLD):
    """Diagonal entry of the LQA penalty matrix at the current iterate.

    Equals ``n * lam * sigma2 * q * |beta0|^(q - 2) / 2``: ``sigma2`` times the
    second derivative of the quadratic surrogate of ``(n lam / 2) |beta|^q``,
    so a fixed point of the LQA update is a stationary point of the
    penalized log-likelihood. Works elementwise on arrays. Coefficients below
    ``threshold`` must have been pruned by the caller.
    """
    absb = np.abs(np.asarray(beta0, dtype=float))
    if np.any(absb < threshold):
        raise DegenerateCoefficient(
            f"coefficient magnitude {absb.min():.3g} is below the prune threshold {threshold:g}"
        )
    w = n * hp.lam * np.asarray(sigma2, dtype=float) * hp.q * absb ** (hp.q - 2.0) / 2.0
    return float(w) if np.ndim(w) == 0 else w


def lqa_weights(absb, lam, q, sigma2, n: int):
    """Vectorized ``lqa_weight`` without validation, for the batched solver.

    All arguments broadcast against each other.
    """
    return n * lam * sigma2 * q * absb ** (q - 2.0) / 2.0


def log_prior_normalizer(q, n_lam):
    """Log of ``q 2^{-(1+1/q)} (n lam)^{1/q} / Gamma(1/q)``, one coordinate."""
    q = np.asarray(q, dtype=float)
    return np.log(q) - (1.0 + 1.0 / q) * math.log(2.0) + np.log(n_lam) / q - gammaln(1.0 / q)


def log_prior(beta, hp: Hyperparams, n: int) -> float:
    """Log density of the product bridge prior at ``beta``."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    n_lam = n * hp.lam
    return float(beta.size * log_prior_normalizer(hp.q, n_lam) - bridge_penalty_term(beta, hp, n))
