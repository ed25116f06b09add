"""Small dense linear-algebra kernel.

Problem sizes here are tiny (n <= a few hundred, p <= 40), so everything is
dense. ``solve_spd`` goes through a Cholesky factorization; ``log_det_signed``
uses a partially pivoted LU so that it never assumes definiteness, and it is
vectorized over leading batch dimensions.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .exceptions import DimensionMismatch, NotPositiveDefinite

#: pivots below this multiple of the largest absolute entry count as zero
SINGULAR_RTOL = 1e-12
SYMMETRY_RTOL = 1e-10


def solve_spd(A, b) -> np.ndarray:
    """Solve ``A x = b`` for symmetric positive-definite ``A``.

    Raises
    ------
    DimensionMismatch
        If ``A`` is not square or does not match ``b``.
    NotPositiveDefinite
        If ``A`` is not symmetric or the Cholesky factorization hits a
        non-positive pivot.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    if b.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"matrix is {A.shape[0]}x{A.shape[1]} but rhs has length {b.shape[0]}")
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > SYMMETRY_RTOL * scale:
        raise NotPositiveDefinite("matrix is not symmetric")
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def log_det_signed(A):
    """Sign and log-absolute-value of the determinant.

    Accepts a single ``(m, m)`` matrix or a stack ``(..., m, m)``. A matrix is
    reported singular (sign 0, log|det| = -inf) as soon as an LU pivot falls
    below ``SINGULAR_RTOL`` times its largest absolute entry.

    Returns
    -------
    sign, log_abs_det
        Floats for a single matrix, arrays shaped like the batch otherwise.
    """
    A = np.array(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise DimensionMismatch(f"expected square matrices, got shape {A.shape}")
    batch_shape = A.shape[:-2]
    m = A.shape[-1]
    U = A.reshape(-1, m, m)
    nb = U.shape[0]
    rows = np.arange(nb)

    scale = np.max(np.abs(U), axis=(1, 2))
    sign = np.ones(nb)
    logabs = np.zeros(nb)
    singular = scale == 0.0
    for k in range(m):
        piv = k + np.argmax(np.abs(U[:, k:, k]), axis=1)
        swap = piv != k
        if np.any(swap):
            top = U[rows, k].copy()
            U[rows, k] = U[rows, piv]
            U[rows, piv] = top
            sign[swap] = -sign[swap]
        pivot = U[:, k, k]
        tiny = (np.abs(pivot) < SINGULAR_RTOL * scale) | (pivot == 0.0)
        singular |= tiny
        safe = np.where(tiny, 1.0, pivot)
        sign *= np.sign(safe)
        logabs += np.log(np.abs(safe))
        if k + 1 < m:
            factors = U[:, k + 1:, k] / safe[:, None]
            U[:, k + 1:, k:] -= factors[:, :, None] * U[:, None, k, k:]

    sign[singular] = 0.0
    logabs[singular] = -np.inf
    if not batch_shape:
        return float(sign[0]), float(logabs[0])
    return sign.reshape(batch_shape), logabs.reshape(batch_shape)
