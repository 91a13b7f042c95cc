"""Sparse direct solves for the Newton systems (SuperLU behind a small contract)."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

RESIDUAL_TOL = 1e-11


class SingularMatrixError(RuntimeError):
    pass


def as_csr(matrix) -> sp.csr_matrix:
    A = sp.csr_matrix(matrix, dtype=float)
    A.sum_duplicates()
    A.sort_indices()
    return A


def factor_and_solve(matrix, rhs, refine: int = 3) -> np.ndarray:
    """Solve A x = b by LU with partial pivoting and a COLAMD column ordering.

    A few steps of iterative refinement are taken if the relative residual
    exceeds ``RESIDUAL_TOL``.
    """
    A = as_csr(matrix)
    b = np.asarray(rhs, dtype=float)
    n, m = A.shape
    if n != m:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if b.shape != (n,):
        raise ValueError(f"rhs has shape {b.shape}, expected ({n},)")
    if n == 0:
        return np.zeros(0)
    try:
        # COLAMD keeps fill far lower than the symmetric orderings on these systems
        lu = spla.splu(A.tocsc(), permc_spec="COLAMD")
    except RuntimeError as exc:
        diag = np.abs(A.diagonal())
        raise SingularMatrixError(
            f"factorisation failed for n={n}: {exc}; "
            f"min |diag| = {diag.min():.3e}, zero diagonal entries = {int((diag == 0).sum())}"
        ) from exc
    x = lu.solve(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return x
    for _ in range(refine):
        r = b - A @ x
        if np.linalg.norm(r) <= RESIDUAL_TOL * bnorm:
            break
        x = x + lu.solve(r)
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError(f"non-finite solution for n={n}; matrix is numerically singular")
    return x


def relative_residual(matrix, x, rhs) -> float:
    b = np.asarray(rhs, dtype=float)
    bn = np.linalg.norm(b)
    r = np.linalg.norm(as_csr(matrix) @ x - b)
    return r / bn if bn else r
