"""Monitored quantum systems and state validation.

States are plain complex numpy arrays: density matrices are ``(d, d)`` and
pure states are length-``d`` vectors. Validation functions return cleaned
copies and raise on semantic violations.
"""
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (DimensionMismatch, NonHermitianHamiltonian, NotHermitian,
                     NotPositive, TraceViolation)
from .linalg import dag, hermitian_part

HAMILTONIAN_RTOL = 1e-10
TRACE_TOL = 1e-8
HERMITIAN_TOL = 1e-10
NEG_EIG_TOL = 1e-8
KET_NORM_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class QuantumSystem:
    """Hamiltonian plus an ordered list of jump operators (hbar = 1)."""
    dim: int
    hamiltonian: np.ndarray
    jumps: tuple
    labels: tuple = field(default=())

    @property
    def n_channels(self):
        return len(self.jumps)

    def jump_products(self):
        """List of ``L_k^dagger L_k``."""
        return [dag(L) @ L for L in self.jumps]

    def effective_hamiltonian(self):
        """``H - (i/2) sum_k L_k^dagger L_k``."""
        Heff = self.hamiltonian.astype(complex)
        for LL in self.jump_products():
            Heff = Heff - 0.5j * LL
        return Heff

    def restricted(self, basis):
        """System compressed onto the span of orthonormal columns `basis`.

        Only meaningful when the span is invariant under H and every L_k.
        """
        V = np.asarray(basis, dtype=complex)
        H = dag(V) @ self.hamiltonian @ V
        Ls = [dag(V) @ L @ V for L in self.jumps]
        return new_system(hermitian_part(H), Ls, labels=self.labels)

    def max_rate(self):
        """max(||H||, sum_k ||L_k^dagger L_k||) in spectral norm."""
        h = np.linalg.norm(self.hamiltonian, 2)
        g = sum(np.linalg.norm(LL, 2) for LL in self.jump_products())
        return max(h, g)


def new_system(hamiltonian, jumps: Sequence = (), labels: Optional[Sequence[str]] = None):
    """Build a validated :class:`QuantumSystem`.

    The Hamiltonian is symmetrized when its anti-Hermitian part is below
    ``1e-10 * max(1, ||H||_F)``; larger deviations raise
    :class:`NonHermitianHamiltonian`.
    """
    H = np.array(hamiltonian, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionMismatch(f"Hamiltonian must be square, got {H.shape}")
    d = H.shape[0]
    scale = max(1.0, np.linalg.norm(H))
    if np.linalg.norm(H - dag(H)) > HAMILTONIAN_RTOL * scale:
        raise NonHermitianHamiltonian("Hamiltonian is not Hermitian")
    H = hermitian_part(H)
    Ls = []
    for k, L in enumerate(jumps):
        L = np.array(L, dtype=complex)
        if L.shape != (d, d):
            raise DimensionMismatch(f"jump {k} has shape {L.shape}, expected {(d, d)}")
        Ls.append(L)
    if labels is None or len(labels) == 0:
        labels = tuple(f"L{k + 1}" for k in range(len(Ls)))
    elif len(labels) != len(Ls):
        raise DimensionMismatch("number of labels differs from number of jumps")
    for M in [H] + Ls:
        M.setflags(write=False)
    return QuantumSystem(d, H, tuple(Ls), tuple(labels))


def validate_density(rho, dim=None):
    """Validate a density matrix and return a cleaned copy.

    Checks trace (1e-8), Hermiticity (1e-10, Frobenius) and positivity.
    Eigenvalues in ``[-1e-8, 0)`` are clipped to zero and the state is
    renormalized; anything more negative raises :class:`NotPositive`.
    """
    rho = np.array(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionMismatch(f"density matrix must be square, got {rho.shape}")
    if dim is not None and rho.shape[0] != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {rho.shape[0]}")
    if not np.all(np.isfinite(rho)):
        raise NotHermitian("density matrix has non-finite entries")
    if np.linalg.norm(rho - dag(rho)) > HERMITIAN_TOL:
        raise NotHermitian("density matrix is not Hermitian")
    rho = hermitian_part(rho)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise TraceViolation(f"trace is {tr!r}")
    w, v = np.linalg.eigh(rho)
    if w[0] < -NEG_EIG_TOL:
        raise NotPositive(f"minimum eigenvalue {w[0]:.3e}")
    if w[0] < 0:
        w = np.clip(w, 0.0, None)
        rho = (v * w) @ dag(v)
        rho = rho / np.trace(rho).real
    return rho


def normalize_ket(psi, dim=None):
    psi = np.array(psi, dtype=complex).reshape(-1)
    if dim is not None and psi.size != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {psi.size}")
    n = np.linalg.norm(psi)
    if n == 0:
        raise TraceViolation("zero vector is not a state")
    return psi / n


def validate_ket(psi, dim=None):
    psi = np.array(psi, dtype=complex).reshape(-1)
    if dim is not None and psi.size != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {psi.size}")
    if abs(np.linalg.norm(psi) - 1.0) > KET_NORM_TOL:
        raise TraceViolation("state vector is not normalized")
    return psi


def ket_to_density(psi):
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def purity(rho):
    rho = np.asarray(rho, dtype=complex)
    return float(np.real(np.vdot(rho, rho)))


def as_density(state, dim=None):
    """Accept a ket or a density matrix and return a validated density."""
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return ket_to_density(validate_ket(state, dim))
    return validate_density(state, dim)


def pure_vector(rho, tol=1e-10):
    """Return the ket of a rank-1 density matrix, or None if mixed."""
    rho = np.asarray(rho, dtype=complex)
    w, v = np.linalg.eigh(hermitian_part(rho))
    if w[-1] < 1.0 - tol or abs(np.sum(w) - w[-1]) > tol:
        return None
    return v[:, -1]


# -- JSON matrix format -------------------------------------------------------

def _pairs(M):
    M = np.asarray(M, dtype=complex).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in M]


def _from_pairs(pairs, d, what):
    arr = np.asarray(pairs, dtype=float)
    if arr.shape != (d * d, 2):
        raise DimensionMismatch(f"{what}: expected {d * d} [re, im] pairs, got shape {arr.shape}")
    return (arr[:, 0] + 1j * arr[:, 1]).reshape(d, d)


def system_to_json(sys: QuantumSystem):
    return {
        "dim": sys.dim,
        "hamiltonian": _pairs(sys.hamiltonian),
        "jumps": [_pairs(L) for L in sys.jumps],
        "labels": list(sys.labels),
    }


def system_from_json(obj):
    d = int(obj["dim"])
    H = _from_pairs(obj["hamiltonian"], d, "hamiltonian")
    Ls = [_from_pairs(L, d, f"jumps[{k}]") for k, L in enumerate(obj.get("jumps", []))]
    return new_system(H, Ls, labels=obj.get("labels") or None)


def load_system(path):
    with open(path) as fh:
        return system_from_json(json.load(fh))


def save_system(sys, path):
    with open(path, "w") as fh:
        json.dump(system_to_json(sys), fh)


def matrix_from_json(obj):
    """Square matrix from ``{"dim": d, "matrix": [[re, im], ...]}``."""
    d = int(obj["dim"])
    return _from_pairs(obj["matrix"], d, "matrix")
