"""Dense complex linear algebra helpers.

Vectorization is column stacking throughout the package::

    vec(A @ X @ B) == kron(B.T, A) @ vec(X)

which in numpy terms is ``M.reshape(-1, order="F")``.
"""
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import NonHermitianInput

HERMITIAN_RTOL = 1e-8


def as_matrix(M):
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {M.shape}")
    return M


def vectorize(M):
    """Column-stack a matrix into a vector."""
    return as_matrix(M).reshape(-1, order="F")


def unvectorize(v, rows, cols=None):
    """Inverse of :func:`vectorize`."""
    cols = rows if cols is None else cols
    return np.asarray(v, dtype=complex).reshape((rows, cols), order="F")


def kron(A, B):
    return np.kron(as_matrix(A), as_matrix(B))


def dag(A):
    return np.conj(np.swapaxes(A, -1, -2))


def hermitian_part(A):
    return 0.5 * (A + dag(A))


class HermitianEig(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def hermitian_eig(X, rtol=HERMITIAN_RTOL):
    """Eigendecomposition of a Hermitian matrix.

    The input is symmetrized before calling LAPACK, so tiny anti-Hermitian
    noise (relative Frobenius size up to `rtol`) is silently discarded.
    Larger deviations raise :class:`NonHermitianInput`.

    Returns eigenvalues in ascending order and a unitary matrix whose
    columns are the eigenvectors.
    """
    X = as_matrix(X)
    if X.shape[0] != X.shape[1]:
        raise NonHermitianInput(f"matrix is not square: {X.shape}")
    scale = np.linalg.norm(X)
    if np.linalg.norm(X - dag(X)) > rtol * scale:
        raise NonHermitianInput("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh(hermitian_part(X))
    return HermitianEig(w, v)


def expm(A):
    """Matrix exponential (Pade scaling and squaring, via scipy)."""
    return scipy.linalg.expm(as_matrix(A))


def commutator_superop(A):
    """Matrix of X -> A X - X A acting on column-stacked vectors."""
    A = as_matrix(A)
    eye = np.eye(A.shape[0])
    return np.kron(eye, A) - np.kron(A.T, eye)


def commutator_gram(A):
    """``C^dagger C`` for ``C = commutator_superop(A)``, assembled from
    Kronecker products without forming ``C``."""
    A = as_matrix(A)
    eye = np.eye(A.shape[0])
    Ah = dag(A)
    return (np.kron(eye, Ah @ A) - np.kron(A.T, Ah) - np.kron(A.conj(), A)
            + np.kron((A @ Ah).T, eye))


def psd_project(rho):
    """Nearest PSD matrix (Frobenius): clip negative eigenvalues."""
    w, v = np.linalg.eigh(hermitian_part(rho))
    w = np.clip(w, 0.0, None)
    return (v * w) @ dag(v)


def support(rho, rtol=1e-8):
    """Orthonormal basis (columns) of the support of a PSD matrix.

    An eigenvector belongs to the support when its eigenvalue exceeds
    `rtol` times the largest eigenvalue.
    """
    w, v = np.linalg.eigh(hermitian_part(rho))
    if w[-1] <= 0:
        return v[:, :0]
    keep = w > rtol * w[-1]
    return v[:, keep]


def projector(basis):
    basis = np.asarray(basis, dtype=complex)
    return basis @ dag(basis)


def null_space(A, rtol=1e-10):
    """Orthonormal basis of the numerical kernel of A.

    Singular values below ``rtol * max(sigma)`` count as zero.
    """
    A = np.asarray(A, dtype=complex)
    n = A.shape[1]
    if A.shape[0] == 0:
        return np.eye(n, dtype=complex)
    _, s, vh = np.linalg.svd(A, full_matrices=True)
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return np.eye(n, dtype=complex)
    rank = int(np.sum(s > rtol * smax))
    return dag(vh[rank:])


def orthonormalize(vectors, rtol=1e-8):
    """Orthonormal basis for the span of the given columns, order kept.

    Modified Gram-Schmidt with a second pass; columns whose residual norm
    falls below `rtol` are dropped.
    """
    vectors = np.asarray(vectors, dtype=complex)
    out = []
    for col in vectors.T:
        r = col.copy()
        for _ in range(2):
            for q in out:
                r = r - q * np.vdot(q, r)
        n = np.linalg.norm(r)
        if n > rtol:
            out.append(r / n)
    if not out:
        return np.zeros((vectors.shape[0], 0), dtype=complex)
    return np.stack(out, axis=1)


def is_projector(P, atol=1e-8):
    P = np.asarray(P, dtype=complex)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        return False
    return (np.linalg.norm(P - dag(P)) <= atol * max(1.0, np.linalg.norm(P))
            and np.linalg.norm(P @ P - P) <= atol * max(1.0, np.linalg.norm(P)))


def sqrtm_psd(rho):
    w, v = np.linalg.eigh(hermitian_part(rho))
    w = np.sqrt(np.clip(w, 0.0, None))
    return (v * w) @ dag(v)


def random_unitary(d, rng):
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_density(d, rng, rank=None):
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ dag(g)
    return rho / np.trace(rho).real
