"""Thin linear algebra layer: factorizations, symmetric eigensolves, cond2.

Sparse systems go through SuperLU, dense ones through LAPACK via scipy and
numpy.  Every solve is residual-checked so that a quietly singular matrix
surfaces as a SolverError instead of garbage downstream.
"""

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError, UsageError

_RESIDUAL_RTOL = 1e-10


class EigResult:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending."""

    def __init__(self, values, vectors):
        self.values = values
        self.vectors = vectors

    def __iter__(self):
        return iter((self.values, self.vectors))


def factorize(matrix):
    """LU-factorize a sparse square matrix once; returns a solve callable.

    The callable accepts a vector or a matrix of stacked right-hand sides.
    Raises SolverError if the matrix is singular.
    """
    matrix = sp.csc_matrix(matrix)
    if matrix.shape[0] != matrix.shape[1]:
        raise UsageError("can only factorize a square matrix")
    try:
        lu = spla.splu(matrix)
    except RuntimeError as exc:
        raise SolverError(f"sparse factorization failed: {exc}") from exc

    def solve(rhs):
        rhs = np.asarray(rhs, dtype=float)
        out = lu.solve(rhs)
        if not np.all(np.isfinite(out)):
            raise SolverError("sparse solve produced non-finite entries")
        return out

    return solve


def sparse_solve(matrix, rhs):
    """Solve A x = b for sparse A with an a posteriori residual check."""
    matrix = sp.csr_matrix(matrix)
    rhs = np.asarray(rhs, dtype=float)
    x = factorize(matrix)(rhs)
    norm_a = spla.norm(matrix)
    resid = np.linalg.norm(matrix @ x - rhs)
    bound = _RESIDUAL_RTOL * (norm_a * np.linalg.norm(x) + np.linalg.norm(rhs))
    if resid > max(bound, 1e-300):
        raise SolverError(
            f"sparse solve residual {resid:.3e} exceeds bound {bound:.3e}")
    return x


class DenseFactor:
    """LU factorization of a dense square matrix with pivot diagnostics."""

    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise UsageError("can only factorize a square matrix")
        self.n = matrix.shape[0]
        with np.errstate(all="ignore"):
            self.lu, self.piv = scipy.linalg.lu_factor(matrix,
                                                       check_finite=False)
        diag = np.abs(np.diag(self.lu))
        self.pivot_min = float(diag.min()) if self.n else 0.0
        self.pivot_max = float(diag.max()) if self.n else 0.0

    @property
    def singular(self):
        """True when elimination met a zero pivot.

        Only an exact breakdown counts. A tiny-but-nonzero pivot signals an
        ill-conditioned system; solving through it is permitted and the
        conditioning is the caller's concern (see cond2).
        """
        return self.pivot_min <= 1e-300

    def solve(self, rhs):
        if self.singular:
            raise SolverError(
                f"dense factor is singular (pivot ratio "
                f"{self.pivot_min:.3e} / {self.pivot_max:.3e})")
        out = scipy.linalg.lu_solve((self.lu, self.piv), rhs,
                                    check_finite=False)
        if not np.all(np.isfinite(out)):
            raise SolverError("dense solve produced non-finite entries")
        return out


def dense_solve(matrix, rhs):
    """Solve a dense square system by partial-pivot LU."""
    return DenseFactor(matrix).solve(np.asarray(rhs, dtype=float))


def sym_eig(matrix):
    """Full eigendecomposition of a symmetric matrix, descending eigenvalues.

    The input must be symmetric to 1e-12 in the relative Frobenius sense.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise UsageError("sym_eig expects a square matrix")
    norm = np.linalg.norm(matrix)
    skew = np.linalg.norm(matrix - matrix.T)
    if skew > 1e-12 * max(norm, 1e-300):
        raise UsageError(
            f"matrix is not symmetric (relative asymmetry {skew / norm:.3e})")
    values, vectors = np.linalg.eigh(matrix)
    order = np.argsort(values)[::-1]
    return EigResult(values[order], vectors[:, order])


def cond2(matrix):
    """Spectral condition number sigma_max / sigma_min.

    Singular values are taken from a direct SVD; squaring the matrix first
    would halve the exponent range that double precision can resolve and
    mask the very ill-conditioned systems this is meant to flag.  Returns
    +inf when the smallest singular value is zero at working precision.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise UsageError("cond2 expects a square matrix")
    if matrix.shape[0] == 0:
        raise UsageError("cond2 of an empty matrix")
    sigma = np.linalg.svd(matrix, compute_uv=False)
    if sigma[-1] <= 1e-300:
        return float("inf")
    return float(sigma[0] / sigma[-1])
