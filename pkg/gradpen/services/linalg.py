"""
Sparse symmetric positive definite algebra: CSR storage and Jacobi-preconditioned CG.

Matrices are ``scipy.sparse.csr_matrix`` in canonical form (sorted, duplicate-free
column indices per row).
"""
import logging
from typing import List, NamedTuple, Optional

import numpy as np
import scipy.sparse as sp

from ..exceptions import LinearSolverError

logger = logging.getLogger(__name__)

SparseMatrix = sp.csr_matrix

DEFAULT_TOL = 1e-10


class CGResult(NamedTuple):
    x: np.ndarray
    iterations: int
    converged: bool
    residual_norm: float
    residual_history: List[float]


def as_csr(A) -> sp.csr_matrix:
    """Convert to canonical CSR"""
    A = sp.csr_matrix(A, dtype=float)
    A.sum_duplicates()
    A.sort_indices()
    return A


def is_symmetric(A: sp.csr_matrix, tol: float = 1e-12) -> bool:
    diff = A - A.T
    if diff.nnz == 0:
        return True
    scale = max(1.0, float(np.abs(A.data).max(initial=0.0)))
    return float(np.abs(diff.data).max()) <= tol * scale


def matvec(A: sp.csr_matrix, x: np.ndarray) -> np.ndarray:
    """Sparse product ``A @ x``"""
    x = np.asarray(x, dtype=float)
    if x.shape != (A.shape[1],):
        raise ValueError(f"vector of length {x.shape} does not match matrix of shape {A.shape}")
    return A @ x


def cg_solve(
    A: sp.csr_matrix,
    b: np.ndarray,
    x0: Optional[np.ndarray] = None,
    tol: float = DEFAULT_TOL,
    maxit: Optional[int] = None,
) -> CGResult:
    """Jacobi-preconditioned conjugate gradients

    Stops when ``||A x - b|| <= tol * ||b||``. Reaching ``maxit`` returns a result
    with ``converged=False``; callers decide whether that is fatal.
    """
    n = A.shape[0]
    b = np.asarray(b, dtype=float)
    if A.shape != (n, n) or b.shape != (n,):
        raise ValueError(f"shape mismatch: matrix {A.shape}, right-hand side {b.shape}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    maxit = 10 * n if maxit is None else int(maxit)

    if not np.all(np.isfinite(A.data)) or not np.all(np.isfinite(b)):
        raise LinearSolverError("non-finite entries in the linear system")
    diagonal = A.diagonal()
    zero = np.flatnonzero(diagonal == 0.0)
    if zero.size:
        raise LinearSolverError(f"zero diagonal entry in row {int(zero[0])}")
    inv_diag = 1.0 / diagonal

    norm_b = float(np.linalg.norm(b))
    if norm_b == 0.0:
        return CGResult(np.zeros(n), 0, True, 0.0, [0.0])

    if x0 is None:
        x = np.zeros(n)
        r = b.copy()
    else:
        x = np.array(x0, dtype=float)
        if x.shape != (n,) or not np.all(np.isfinite(x)):
            raise LinearSolverError("initial guess has wrong length or non-finite entries")
        r = b - A @ x

    threshold = tol * norm_b
    norm_r = float(np.linalg.norm(r))
    history = [norm_r]
    if norm_r <= threshold:
        return CGResult(x, 0, True, norm_r, history)

    z = inv_diag * r
    d = z.copy()
    rz = float(r @ z)
    for iteration in range(1, maxit + 1):
        Ad = A @ d
        curvature = float(d @ Ad)
        if curvature <= 0.0:
            raise LinearSolverError(
                "matrix is not positive definite along a search direction",
                iterations=iteration,
                residual=norm_r,
            )
        step = rz / curvature
        x += step * d
        r -= step * Ad
        norm_r = float(np.linalg.norm(r))
        history.append(norm_r)
        if norm_r <= threshold:
            return CGResult(x, iteration, True, norm_r, history)
        z = inv_diag * r
        rz_new = float(r @ z)
        d = z + (rz_new / rz) * d
        rz = rz_new

    logger.warning("CG stopped after %d iterations, relative residual %.3e", maxit, norm_r / norm_b)
    return CGResult(x, maxit, False, norm_r, history)
