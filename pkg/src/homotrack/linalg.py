"""Gram-Schmidt QR (modified, reorthogonalized once) and least squares in extended complex arithmetic.

Matrices are ExtComplex arrays of shape ``(m, n, *batch)``: every trailing
batch index is an independent problem and all of them are factored by one
compiled kernel call.  No pivoting; a column whose remaining norm falls
below ``rank_tol`` times the largest column norm marks that problem
singular.
"""

from __future__ import annotations

import numpy as np

from . import _kernels as _k
from .xprec import ExtComplex, ExtReal, Precision

__all__ = ["SingularMatrixError", "RANK_TOL", "mgs_qr", "mgs_qr_batch", "least_squares_solve", "least_squares_batch"]

RANK_TOL = {Precision.D: 1e-8, Precision.DD: 1e-16, Precision.QD: 1e-32}


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a diagonal entry of R is below the rank tolerance."""


def _to_core(x: ExtReal, k: int) -> np.ndarray:
    # move the first k value axes behind the batch axes, limbs stay last
    nb = x.limbs.ndim - 1 - k
    return np.moveaxis(x.limbs, tuple(range(k)), tuple(range(nb, nb + k)))


def _from_core(limbs: np.ndarray, k: int) -> ExtReal:
    nb = limbs.ndim - 1 - k
    return ExtReal(np.moveaxis(limbs, tuple(range(nb, nb + k)), tuple(range(k))))


def _check(A: ExtComplex, rank_tol):
    if len(A.shape) < 2:
        raise ValueError("expected a matrix of shape (m, n, *batch)")
    m, n = A.shape[:2]
    if m < n:
        raise ValueError(f"need at least as many rows as columns, got {m}x{n}")
    return RANK_TOL[A.prec] if rank_tol is None else float(rank_tol)


def mgs_qr_batch(A: ExtComplex, rank_tol: float | None = None):
    """Factor ``A = Q R`` for every batch index.

    Returns ``(Q, R, singular)`` where ``R`` has a real positive diagonal and
    ``singular`` is a boolean array over the batch shape.  Columns of
    singular problems hold placeholder values.
    """
    tol = _check(A, rank_tol)
    qr, qi, rr, ri, sing = _k.g_mgs_qr(_to_core(A.re, 2), _to_core(A.im, 2), tol)
    Q = ExtComplex(_from_core(qr, 2), _from_core(qi, 2))
    R = ExtComplex(_from_core(rr, 2), _from_core(ri, 2))
    return Q, R, sing != 0.0


def mgs_qr(A: ExtComplex, rank_tol: float | None = None):
    """QR of one (or a batch of) ``m x n`` matrices; raises on rank deficiency."""
    Q, R, singular = mgs_qr_batch(A, rank_tol)
    if np.any(singular):
        raise SingularMatrixError("matrix is rank deficient to working tolerance")
    return Q, R


def least_squares_batch(A: ExtComplex, b: ExtComplex, rank_tol: float | None = None):
    """Solve ``min ||A x - b||`` per batch index via ``R x = Q^H b``.

    ``A`` is ``(m, n, *batch)``, ``b`` is ``(m, *batch)``.  Returns
    ``(x, singular)``; solutions of singular problems are meaningless.
    """
    tol = _check(A, rank_tol)
    if b.shape[0] != A.shape[0]:
        raise ValueError("right-hand side length does not match the matrix")
    if b.prec is not A.prec:
        raise ValueError("matrix and right-hand side use different precision levels")
    xr, xi, sing = _k.g_lstsq(
        _to_core(A.re, 2), _to_core(A.im, 2), _to_core(b.re, 1), _to_core(b.im, 1), tol
    )
    return ExtComplex(_from_core(xr, 1), _from_core(xi, 1)), sing != 0.0


def least_squares_solve(A: ExtComplex, b: ExtComplex, rank_tol: float | None = None) -> ExtComplex:
    x, singular = least_squares_batch(A, b, rank_tol)
    if np.any(singular):
        raise SingularMatrixError("matrix is rank deficient to working tolerance")
    return x
