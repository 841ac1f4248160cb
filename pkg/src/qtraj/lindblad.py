"""Ensemble-level (Lindblad) dynamics.

The Liouvillian acts on column-stacked density matrices::

    Lmat = -i (I (x) H - H^T (x) I)
           + sum_k [ conj(L_k) (x) L_k - 1/2 (I (x) L_k^+ L_k + (L_k^+ L_k)^T (x) I) ]

Its conjugate transpose is the matrix of the adjoint generator with
respect to the Hilbert-Schmidt inner product.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .errors import ConvergenceFailure, DimensionMismatch
from .linalg import dag, expm, hermitian_part, unvectorize, vectorize
from .system import QuantumSystem, validate_density

DENSE_MAX_DIM = 32
GAP_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class Liouvillian:
    mat: np.ndarray
    dim: int

    def apply(self, rho):
        d = self.dim
        return unvectorize(self.mat @ vectorize(rho), d)


def _check_square(sys, X):
    X = np.asarray(X, dtype=complex)
    if X.shape != (sys.dim, sys.dim):
        raise DimensionMismatch(f"expected {(sys.dim, sys.dim)}, got {X.shape}")
    return X


def apply_generator(sys: QuantumSystem, rho):
    """Right-hand side of the Lindblad equation."""
    rho = _check_square(sys, rho)
    H = sys.hamiltonian
    out = -1j * (H @ rho - rho @ H)
    for L in sys.jumps:
        Ld = dag(L)
        LdL = Ld @ L
        out += L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)
    return out


def apply_adjoint_generator(sys: QuantumSystem, X):
    """Heisenberg-picture generator: dual of :func:`apply_generator`."""
    X = _check_square(sys, X)
    H = sys.hamiltonian
    out = 1j * (H @ X - X @ H)
    for L in sys.jumps:
        Ld = dag(L)
        LdL = Ld @ L
        out += Ld @ X @ L - 0.5 * (LdL @ X + X @ LdL)
    return out


def _liouvillian_terms(sys, kron, eye):
    H = sys.hamiltonian
    Lm = -1j * (kron(eye, H) - kron(H.T, eye))
    for L in sys.jumps:
        LdL = dag(L) @ L
        Lm = Lm + kron(L.conj(), L) - 0.5 * (kron(eye, LdL) + kron(LdL.T, eye))
    return Lm


@lru_cache(maxsize=8)
def build_liouvillian(sys: QuantumSystem) -> Liouvillian:
    """Dense d^2 x d^2 Liouvillian (column-stacking convention)."""
    mat = _liouvillian_terms(sys, np.kron, np.eye(sys.dim))
    mat.setflags(write=False)
    return Liouvillian(mat, sys.dim)


@lru_cache(maxsize=8)
def sparse_liouvillian(sys: QuantumSystem):
    eye = sp.identity(sys.dim, dtype=complex, format="csr")

    def skron(A, B):
        return sp.kron(sp.csr_matrix(A), sp.csr_matrix(B), format="csr")

    return _liouvillian_terms(sys, skron, eye).tocsr()


def _evolve_vec(sys, v, t, adjoint=False):
    if t == 0:
        return v.copy()
    if sys.dim <= DENSE_MAX_DIM:
        return propagator(sys, float(t), adjoint) @ v
    M = sparse_liouvillian(sys)
    if adjoint:
        M = M.conj().T.tocsr()
    return expm_multiply(M * t, v)


@lru_cache(maxsize=4)
def _expm_pair(sys, t):
    P = expm(build_liouvillian(sys).mat * t)
    P.setflags(write=False)
    return P


def propagator(sys: QuantumSystem, t, adjoint=False):
    """Dense propagator ``expm(Lmat t)``, or its adjoint (cached)."""
    P = _expm_pair(sys, float(t))
    return dag(P) if adjoint else P


def propagate(sys: QuantumSystem, rho0, t, validate=True):
    """Evolve a density matrix for time `t` under the Lindblad equation.

    Uses the dense matrix exponential for d <= 32 and a Krylov/Taylor
    action of the sparse Liouvillian otherwise. With ``validate=False``
    arbitrary (e.g. unnormalized) matrices may be propagated.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    rho0 = _check_square(sys, rho0)
    out = unvectorize(_evolve_vec(sys, vectorize(rho0), t), sys.dim)
    out = hermitian_part(out) if np.allclose(rho0, dag(rho0)) else out
    if validate:
        out = validate_density(out, sys.dim)
    return out


def propagate_adjoint(sys: QuantumSystem, X, t):
    """Heisenberg-picture evolution ``exp(L^dagger t)(X)``."""
    X = _check_square(sys, X)
    out = unvectorize(_evolve_vec(sys, vectorize(X), t, adjoint=True), sys.dim)
    return hermitian_part(out) if np.allclose(X, dag(X)) else out


def liouvillian_spectrum(sys: QuantumSystem):
    return np.linalg.eigvals(build_liouvillian(sys).mat)


def spectral_gap(sys: QuantumSystem, tol=None):
    """Smallest nonzero |Re(lambda)| of the Liouvillian (dense, d <= 32).

    Returns None when every eigenvalue has vanishing real part.
    """
    ev = liouvillian_spectrum(sys)
    scale = max(1.0, np.max(np.abs(ev)))
    tol = 1e-9 * scale if tol is None else tol
    re = np.abs(ev.real)
    nz = re[re > tol]
    return float(nz.min()) if nz.size else None


def convergence_horizon(sys: QuantumSystem):
    """Time after which transients are negligible: 50 / gap.

    Falls back to ``1e4 / max_rate`` when the gap is below 1e-10, when there
    is no decay at all, or when d exceeds the dense limit.
    """
    rate = sys.max_rate()
    fallback = 1e4 / rate if rate > 0 else 1.0
    if sys.dim > DENSE_MAX_DIM:
        return fallback
    gap = spectral_gap(sys)
    if gap is None or gap < GAP_FLOOR:
        return fallback
    return 50.0 / gap


def asymptotic_state(sys: QuantumSystem, rho0, horizon=None):
    """Lindblad state at the convergence horizon."""
    T = convergence_horizon(sys) if horizon is None else horizon
    if sys.dim <= DENSE_MAX_DIM:
        v = propagator(sys, T) @ vectorize(np.asarray(rho0, dtype=complex))
        return validate_density(hermitian_part(unvectorize(v, sys.dim)), sys.dim)
    return propagate(sys, rho0, T)


def asymptotic_weights(sys: QuantumSystem, rho0, decomposition, horizon=None):
    """Effective asymptotic weights tr[rho(T) P_Q] per non-decaying block.

    Returns a list of ``(block_index, weight)``. Raises
    :class:`ConvergenceFailure` if the decaying blocks still hold more than
    1e-6 probability, or if the weights do not sum to one within 1e-6.
    """
    rho0 = validate_density(rho0, sys.dim) if np.ndim(rho0) == 2 else \
        np.outer(rho0, np.conj(rho0))
    rhoT = asymptotic_state(sys, rho0, horizon)
    weights, decaying = [], 0.0
    for i, (P, role) in enumerate(zip(decomposition.block_projectors(), decomposition.roles)):
        w = float(np.real(np.trace(rhoT @ P)))
        if role == "decaying":
            decaying += w
        else:
            weights.append((i, max(0.0, w)))
    if decaying > 1e-6:
        raise ConvergenceFailure(f"decaying occupation {decaying:.2e} at the horizon")
    total = sum(w for _, w in weights)
    if abs(total - 1.0) > 1e-6:
        raise ConvergenceFailure(f"asymptotic weights sum to {total!r}")
    return weights
