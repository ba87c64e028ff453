"""Proper orthogonal decomposition by the method of snapshots.

Each field carries its own inner product: H1 seminorm for velocities (and
their interior-shifted variant), L2 for pressure, H1 seminorm on the
interface for displacements, L2 on the interface for the interface
reaction.  Modes are orthonormal in that product.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import linalg
from .errors import EmptySpectrum, SolverError, UsageError
from .meshfe import assemble

RANK_RTOL = 1e-12


def inner_product(fesys, tag):
    """Gram matrix of the snapshot inner product for one field tag."""
    if tag in ("u", "z"):
        k = assemble("k_omega", fesys)
        return sp.block_diag((k, k)).tocsr()
    if tag == "p":
        return assemble("m_p", fesys)
    if tag == "eta":
        return assemble("k_e", fesys)
    if tag == "lambda":
        return assemble("m_e", fesys)
    raise UsageError(f"no inner product for field tag {tag!r}")


def correlation(snapshots, inner):
    """Snapshot correlation matrix S^T X S, symmetrized."""
    snapshots = np.asarray(snapshots, dtype=float)
    c = snapshots.T @ (inner @ snapshots)
    return 0.5 * (c + c.T)


@dataclass
class PODBasis:
    """Modes of one field with the full singular spectrum of its snapshots.

    ``sigma`` keeps every snapshot singular value (including the discarded
    tail) so energy fractions refer to the total; ``modes`` holds only the
    retained columns.
    """

    field: str
    modes: np.ndarray
    sigma: np.ndarray

    @property
    def rank(self):
        return self.modes.shape[1]

    def energy_fractions(self):
        total = float(np.sum(self.sigma ** 2))
        return self.sigma ** 2 / total

    def cumulative_energy(self):
        return np.cumsum(self.energy_fractions())


def retained_energy(sigma, n):
    """Fraction of snapshot energy carried by the first n singular values."""
    sigma = np.asarray(sigma, dtype=float)
    total = float(np.sum(sigma ** 2))
    if total <= 0.0:
        raise EmptySpectrum("snapshot set carries no energy")
    return float(np.sum(sigma[:n] ** 2) / total)


def compute_basis(snapshots, inner, field="u", n_max=None):
    """POD basis of a snapshot matrix in the given inner product.

    Eigenpairs of the correlation matrix are kept while their eigenvalue
    exceeds RANK_RTOL times the largest one; the basis is then truncated to
    ``n_max`` columns if requested.  A single modified Gram-Schmidt pass in
    the snapshot inner product polishes the orthonormality that the small
    eigenvalues lose.
    """
    snapshots = np.asarray(snapshots, dtype=float)
    if snapshots.ndim != 2 or snapshots.shape[1] == 0:
        raise EmptySpectrum("no snapshots given")
    c = correlation(snapshots, inner)
    values, vectors = linalg.sym_eig(c)
    if values.size == 0 or values[0] <= 0.0:
        raise EmptySpectrum(f"all {field!r} snapshots are zero")

    rank = int(np.sum(values > RANK_RTOL * values[0]))
    keep = rank if n_max is None else min(rank, int(n_max))
    if n_max is not None and n_max < 1:
        raise UsageError(f"n_max must be positive, got {n_max}")
    sigma_full = np.sqrt(np.clip(values, 0.0, None))

    modes = snapshots @ (vectors[:, :keep] / sigma_full[:keep])

    # One re-orthonormalization sweep; eigenvector round-off grows towards
    # the small end of the spectrum.
    for i in range(keep):
        w = modes[:, i]
        xw = inner @ w
        if i:
            coef = modes[:, :i].T @ xw
            w = w - modes[:, :i] @ coef
            xw = inner @ w
        norm = np.sqrt(abs(w @ xw))
        if norm <= 0.0:
            raise SolverError(
                f"mode {i} of field {field!r} collapsed during "
                "re-orthonormalization")
        modes[:, i] = w / norm

    return PODBasis(field=field, modes=modes, sigma=sigma_full)
