"""Dense complex linear algebra for the determinant formulas.

All functions accept a single square matrix or a stack ``(..., k, k)``.
"""
from __future__ import annotations

import numpy as np

SINGULAR_RTOL = 1e-12


class SingularMatrix(np.linalg.LinAlgError):
    def __init__(self, det, threshold):
        super().__init__(f"matrix is singular: |det|={abs(det):.3e} <= {threshold:.3e}")
        self.det = det
        self.threshold = threshold


def as_cmatrix(M) -> np.ndarray:
    A = np.asarray(M, dtype=complex)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expected square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def lu_det(M):
    """Determinant by partial-pivot LU (LAPACK getrf)."""
    A = as_cmatrix(M)
    if A.shape[-1] == 0:
        return np.ones(A.shape[:-2], dtype=complex)[()]
    return np.linalg.det(A)


def row_scale(M):
    """Largest row 2-norm."""
    A = np.asarray(M, dtype=complex)
    if A.shape[-1] == 0:
        return np.ones(A.shape[:-2])[()]
    return np.linalg.norm(A, axis=-1).max(axis=-1)


def hadamard_bound(M):
    """Product of row 2-norms, an upper bound on ``|det M|``."""
    A = np.asarray(M, dtype=complex)
    if A.shape[-1] == 0:
        return np.ones(A.shape[:-2])[()]
    return np.prod(np.linalg.norm(A, axis=-1), axis=-1)


def singularity_threshold(M, rtol=SINGULAR_RTOL):
    n = np.asarray(M).shape[-1]
    return rtol * row_scale(M) ** n


def inverse(M, rtol=SINGULAR_RTOL) -> np.ndarray:
    A = as_cmatrix(M)
    det = lu_det(A)
    thr = singularity_threshold(A, rtol)
    bad = np.abs(det) <= thr
    if np.any(bad):
        idx = np.argmax(np.atleast_1d(bad))
        raise SingularMatrix(np.atleast_1d(det)[idx], float(np.atleast_1d(thr)[idx]))
    return np.linalg.inv(A)


def replace_column(M, col, values):
    A = np.array(M, dtype=complex, copy=True)
    A[..., :, col] = values
    return A


def det_derivative(M, Mprime, rtol=SINGULAR_RTOL):
    """Derivative of ``det M(x)`` given ``M`` and ``M'`` (Jacobi's formula).

    Uses ``tr(adj(M) M')`` with ``adj(M) = det(M) M^-1`` where ``M`` is safely
    invertible and the column-replacement expansion
    ``sum_i det(M with column i replaced by column i of M')`` elsewhere.
    """
    A = as_cmatrix(M)
    B = as_cmatrix(Mprime)
    if A.shape != B.shape:
        raise ValueError("M and M' must have the same shape")
    k = A.shape[-1]
    if k == 0:
        return np.zeros(A.shape[:-2], dtype=complex)[()]
    batch = A.shape[:-2]
    A3, B3 = A.reshape((-1, k, k)), B.reshape((-1, k, k))
    det = np.linalg.det(A3)
    ok = np.abs(det) > singularity_threshold(A3, rtol)
    out = np.zeros(len(A3), dtype=complex)
    if ok.any():
        sol = np.linalg.solve(A3[ok], B3[ok])
        out[ok] = det[ok] * np.trace(sol, axis1=-2, axis2=-1)
        # subnormal determinants can overflow the solve
        ok &= np.isfinite(out)
    if not ok.all():
        bad = ~ok
        out[bad] = 0
        for i in range(k):
            out[bad] += np.linalg.det(replace_column(A3[bad], i, B3[bad][:, :, i]))
    return out.reshape(batch)[()]


def residual_norm(values) -> float:
    """Max-modulus norm over all entries (0 for empty input)."""
    a = np.asarray(values)
    return float(np.max(np.abs(a))) if a.size else 0.0
