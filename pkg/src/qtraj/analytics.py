"""Diagnostics of monitored dynamics.

Overlaps and localization statistics, invariant-state predicates for both
unravelings, classification of incomplete localization, fidelity based
ergodicity measures, coherence and two-qubit entanglement.
"""
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence

import numpy as np

from .errors import (DimensionMismatch, NonHermitianHamiltonian, NotAProjector,
                     UnknownObservable, WeightNormalization)
from .lindblad import apply_generator
from .linalg import dag, hermitian_part, is_projector, sqrtm_psd, support
from .system import QuantumSystem, new_system
from .unravel import EnsembleStats

LOCALIZED = 0.99
DWELL_FRACTION = 0.1
INVARIANT_TOL = 1e-8
CLASSIFY_TOL = 1e-8
Z_SIGMA = 3.0


def subspace_overlap(rho, P):
    """``tr[rho P]`` clamped to [0, 1]."""
    P = np.asarray(P, dtype=complex)
    if not is_projector(P):
        raise NotAProjector("P must be a Hermitian idempotent")
    return float(np.clip(np.trace(np.asarray(rho) @ P).real, 0.0, 1.0))


# -- localization ---------------------------------------------------------------

@dataclass
class LocalizationReport:
    labels: List[str]
    terminal_overlaps: np.ndarray          # (n_traj, n_proj)
    frequencies: np.ndarray
    predicted_weights: np.ndarray
    std_errors: np.ndarray
    z_scores: np.ndarray
    within_3sigma: np.ndarray
    localized: np.ndarray                  # (n_traj, n_proj) with dwell
    localization_complete: np.ndarray      # (n_traj,)

    @property
    def passed(self):
        return bool(np.all(self.within_3sigma))


def localized_mask(overlap_series, threshold=LOCALIZED, dwell=DWELL_FRACTION):
    """Trajectories whose overlap exceeds `threshold` over the final `dwell` fraction.

    `overlap_series` has shape ``(n_traj, n_proj, n_samples)``.
    """
    ns = overlap_series.shape[-1]
    tail = max(1, int(np.ceil(dwell * ns)))
    return np.all(overlap_series[..., ns - tail:] > threshold, axis=-1)


def binomial_check(freq, weight, n, sigmas=Z_SIGMA):
    """``(std_error, z, ok)`` for an empirical frequency against a weight."""
    se = np.sqrt(max(weight * (1 - weight), 0.0) / n)
    if se == 0:
        ok = abs(freq - weight) <= 1e-12
        return 0.0, 0.0 if ok else np.inf, ok
    z = (freq - weight) / se
    return se, z, abs(z) <= sigmas


def localization_statistics(ensemble: EnsembleStats, predicted_weights: Sequence[float],
                            labels: Optional[Sequence[str]] = None,
                            threshold=LOCALIZED, dwell=DWELL_FRACTION):
    """Compare terminal localization frequencies with predicted weights.

    The ensemble must have been run with the projectors of interest
    registered, in the order of `predicted_weights`.
    """
    series = ensemble.overlap_series
    n, k = series.shape[0], series.shape[1]
    w = np.asarray(predicted_weights, dtype=float)
    if w.size != k:
        raise DimensionMismatch(f"{w.size} weights for {k} registered projectors")
    loc = localized_mask(series, threshold, dwell)
    freq = loc.mean(axis=0)
    se, z, ok = np.zeros(k), np.zeros(k), np.zeros(k, dtype=bool)
    for j in range(k):
        se[j], z[j], ok[j] = binomial_check(freq[j], w[j], n)
    term = series[:, :, -1]
    labels = list(labels) if labels is not None else [f"P{j + 1}" for j in range(k)]
    return LocalizationReport(labels, term, freq, w, se, z, ok, loc,
                              term.max(axis=1) > threshold)


# -- invariant states ---------------------------------------------------------------

@dataclass
class InvariantCheck:
    invariant: bool
    lindblad_residual: float
    condition_residual: float


def check_invariant_diffusive(sys: QuantumSystem, rho, tol=INVARIANT_TOL):
    """Is `rho` a fixed point of every diffusive trajectory?

    Needs ``L(rho) = 0`` and ``L_k rho + rho L_k^+ = <L_k + L_k^+> rho``.
    """
    rho = np.asarray(rho, dtype=complex)
    lres = float(np.linalg.norm(apply_generator(sys, rho)))
    cres = 0.0
    for L in sys.jumps:
        M = L @ rho + rho @ dag(L)
        cres = max(cres, float(np.linalg.norm(M - np.trace(M).real * rho)))
    return InvariantCheck(lres <= tol and cres <= tol, lres, cres)


def check_invariant_jump(sys: QuantumSystem, rho, tol=INVARIANT_TOL):
    """Is `rho` a fixed point of every jump trajectory?

    Needs ``L(rho) = 0`` and ``L_k rho L_k^+ = <L_k^+ L_k> rho``.
    """
    rho = np.asarray(rho, dtype=complex)
    lres = float(np.linalg.norm(apply_generator(sys, rho)))
    cres = 0.0
    for L in sys.jumps:
        M = L @ rho @ dag(L)
        cres = max(cres, float(np.linalg.norm(M - np.trace(M).real * rho)))
    return InvariantCheck(lres <= tol and cres <= tol, lres, cres)


# -- incomplete localization --------------------------------------------------------

def _scalar_on(M, tol):
    """Return z if M = z * identity within tol, else None."""
    n = M.shape[0]
    z = np.trace(M) / n
    if np.linalg.norm(M - z * np.eye(n)) <= tol * max(1.0, abs(z)):
        return z
    return None


def _intertwiner_exists(ops, VQ, VP, tol):
    n = VQ.shape[1]
    if n != VP.shape[1]:
        return False
    rows = []
    for A in ops:
        AQ, AP = dag(VQ) @ A @ VQ, dag(VP) @ A @ VP
        # Z intertwines the compressions: A_Q Z = Z A_P for every operator
        rows.append(np.kron(np.eye(n), AQ) - np.kron(AP.T, np.eye(n)))
    s = np.linalg.svd(np.vstack(rows), compute_uv=False)
    return s[-1] <= tol * max(1.0, s[0])


def _same_spectrum(A, B, tol):
    a = np.sort_complex(np.linalg.eigvals(A))
    b = np.sort_complex(np.linalg.eigvals(B))
    return a.shape == b.shape and np.allclose(a, b, atol=tol * max(1.0, np.abs(a).max(initial=0)))


def classify_incomplete_localization(sys: QuantumSystem, P_Q, P_P, scheme, tol=CLASSIFY_TOL):
    """Can trajectories of `scheme` tell the blocks ``Q`` and ``P`` apart?

    Returns one of

    ``"case-i"``
        the measurement back-action is the same constant on both blocks
        (``(L_k + L_k^+)`` for diffusion, ``L_k^+ L_k`` for jumps);
    ``"case-ii-noiseless"``
        a partial isometry between the blocks intertwines H and every L_k;
    ``"undetermined"``
        jump scheme, no phase-free intertwiner, but the spectra of the
        restricted H and ``L_k^+ L_k`` agree, so a phase-twisted equivalence
        cannot be ruled out;
    ``"complete-expected"``
        none of the above.
    """
    if scheme not in ("diffusive", "jump"):
        raise ValueError(f"unknown scheme {scheme!r}")
    for P in (P_Q, P_P):
        if not is_projector(P):
            raise NotAProjector("block projectors must be Hermitian idempotents")
    P_Q, P_P = np.asarray(P_Q, dtype=complex), np.asarray(P_P, dtype=complex)
    if np.linalg.norm(P_Q @ P_P) > 1e-8:
        raise NotAProjector("block projectors must be orthogonal")
    VQ, VP = support(P_Q, 0.5), support(P_P, 0.5)
    case_i = True
    for L in sys.jumps:
        M = L + dag(L) if scheme == "diffusive" else dag(L) @ L
        zq = _scalar_on(dag(VQ) @ M @ VQ, tol)
        zp = _scalar_on(dag(VP) @ M @ VP, tol)
        if zq is None or zp is None or abs(zq - zp) > tol * max(1.0, abs(zq)):
            case_i = False
            break
    if case_i:
        return "case-i"
    ops = [sys.hamiltonian]
    for L in sys.jumps:
        ops += [L, dag(L)]
    if _intertwiner_exists(ops, VQ, VP, tol):
        return "case-ii-noiseless"
    if scheme == "jump" and VQ.shape[1] == VP.shape[1]:
        H = sys.hamiltonian
        ok = _same_spectrum(dag(VQ) @ H @ VQ, dag(VP) @ H @ VP, 1e-6)
        for L in sys.jumps:
            LL = dag(L) @ L
            ok = ok and _same_spectrum(dag(VQ) @ LL @ VQ, dag(VP) @ LL @ VP, 1e-6)
        if ok:
            return "undetermined"
    return "complete-expected"


# -- ergodicity -------------------------------------------------------------------

def fidelity(rho, sigma):
    """Uhlmann fidelity ``(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``."""
    s = sqrtm_psd(rho)
    w = np.linalg.eigvalsh(hermitian_part(s @ np.asarray(sigma) @ s))
    return float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)


def participation_ratio(weights):
    """``sum_j w_j^2`` for a normalized weight vector."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-6:
        raise WeightNormalization(f"weights must be non-negative and sum to 1 (sum {w.sum()!r})")
    return float(np.sum(np.clip(w, 0.0, None) ** 2))


@dataclass
class ErgodicityReport:
    fidelities: np.ndarray
    mean_fidelity: float
    std_error: float
    participation_ratio: Optional[float] = None


def mean_fidelity(ensemble: EnsembleStats, rho_s, predicted_weights=None):
    """Fidelity between each trajectory's time average and the Lindblad state."""
    F = np.array([fidelity(r, rho_s) for r in ensemble.mean_fidelity_inputs])
    pr = participation_ratio(predicted_weights) if predicted_weights is not None else None
    se = float(F.std(ddof=1) / np.sqrt(len(F))) if len(F) > 1 else 0.0
    return ErgodicityReport(F, float(F.mean()), se, pr)


# -- coherence and entanglement -------------------------------------------------------

def l1_coherence(rho, basis):
    """Sum of off-diagonal magnitudes of `rho` in the orthonormal `basis`."""
    B = np.stack([np.asarray(b, dtype=complex) for b in basis], axis=1)
    if np.linalg.norm(dag(B) @ B - np.eye(B.shape[1])) > 1e-8:
        raise DimensionMismatch("coherence basis must be orthonormal")
    M = np.abs(dag(B) @ np.asarray(rho) @ B)
    return float(M.sum() - np.trace(M))


def reduced_density(rho, keep, n_qubits):
    """Partial trace onto the 1-based qubits `keep` (in the given order)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2 ** n_qubits, 2 ** n_qubits):
        raise DimensionMismatch(f"state is not a {n_qubits}-qubit density matrix")
    keep = [int(k) - 1 for k in keep]
    if len(set(keep)) != len(keep) or any(not 0 <= k < n_qubits for k in keep):
        raise DimensionMismatch("invalid qubit indices")
    drop = [q for q in range(n_qubits) if q not in keep]
    t = rho.reshape([2] * (2 * n_qubits))
    perm = keep + drop + [n_qubits + q for q in keep] + [n_qubits + q for q in drop]
    t = t.transpose(perm)
    dk, dd = 2 ** len(keep), 2 ** len(drop)
    t = t.reshape(dk, dd, dk, dd)
    return np.einsum("ajbj->ab", t)


_YY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def concurrence(rho, pair=None, n_qubits=None):
    """Wootters concurrence of a two-qubit state.

    With `pair` (1-based qubit indices) the two-qubit state is first
    obtained by partial trace from an `n_qubits` register.
    """
    rho = np.asarray(rho, dtype=complex)
    if pair is not None:
        n_qubits = n_qubits or int(round(np.log2(rho.shape[0])))
        rho = reduced_density(rho, pair, n_qubits)
    if rho.shape != (4, 4):
        raise DimensionMismatch(f"concurrence needs a 4x4 state, got {rho.shape}")
    R = rho @ _YY @ rho.conj() @ _YY
    lam = np.sqrt(np.clip(np.sort(np.linalg.eigvals(R).real)[::-1], 0.0, None))
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def concurrence_batch(rhos, pair=None, n_qubits=None):
    """Concurrence of each state in a stack ``(B, d, d)``."""
    rhos = np.asarray(rhos, dtype=complex)
    B, d = rhos.shape[0], rhos.shape[1]
    if pair is not None:
        n = n_qubits or int(round(np.log2(d)))
        if d != 2 ** n:
            raise DimensionMismatch(f"state is not a {n}-qubit density matrix")
        keep = [int(k) - 1 for k in pair]
        drop = [q for q in range(n) if q not in keep]
        t = rhos.reshape([B] + [2] * (2 * n))
        perm = [0] + [1 + q for q in keep + drop] + [1 + n + q for q in keep + drop]
        t = t.transpose(perm).reshape(B, 4, 2 ** len(drop), 4, 2 ** len(drop))
        rhos = np.einsum("bajcj->bac", t)
    if rhos.shape[1:] != (4, 4):
        raise DimensionMismatch("concurrence needs 4x4 states")
    R = rhos @ _YY @ rhos.conj() @ _YY
    lam = np.sqrt(np.clip(np.sort(np.linalg.eigvals(R).real, axis=1)[:, ::-1], 0.0, None))
    return np.clip(lam[:, 0] - lam[:, 1] - lam[:, 2] - lam[:, 3], 0.0, None)


# -- batched observables for trajectory runs --------------------------------------------

def _batch_overlap(P):
    P = np.asarray(P, dtype=complex)
    return lambda rhos: np.einsum("bij,ji->b", rhos, P).real


def _batch_expect(O):
    O = np.asarray(O, dtype=complex)
    return lambda rhos: np.einsum("bij,ji->b", rhos, O).real


def make_observable(name, dim, projector=None, basis=None, pair=None, site=1):
    """Function mapping a batch of densities ``(B, d, d)`` to values ``(B,)``.

    Names: ``overlap`` (needs `projector`), ``sx``/``sy``/``sz`` (Pauli
    polarization of qubit `site`), ``coherence`` (l1 in `basis`),
    ``concurrence`` (qubit `pair`) and ``purity``.
    """
    from .zoo import SIGMA_X, SIGMA_Y, SIGMA_Z, embed
    if name == "overlap":
        if projector is None:
            raise UnknownObservable("overlap needs a projector")
        return _batch_overlap(projector)
    if name in ("sx", "sy", "sz"):
        n = int(round(np.log2(dim)))
        if 2 ** n != dim:
            raise UnknownObservable("polarization needs a qubit register")
        op = {"sx": SIGMA_X, "sy": SIGMA_Y, "sz": SIGMA_Z}[name]
        return _batch_expect(embed(op, site, n, 2))
    if name == "purity":
        return lambda rhos: np.einsum("bij,bji->b", rhos, rhos).real
    if name == "coherence":
        if basis is None:
            raise UnknownObservable("coherence needs a basis")
        return lambda rhos: np.array([l1_coherence(r, basis) for r in rhos])
    if name == "concurrence":
        n = int(round(np.log2(dim)))
        pr = (1, 2) if pair is None else tuple(pair)
        return lambda rhos: concurrence_batch(rhos, pr, n)
    raise UnknownObservable(f"unknown observable {name!r}")


# -- generalized update rule ---------------------------------------------------------

@dataclass
class UpdateRuleReport:
    labels: List[str]
    frequencies: np.ndarray
    predicted: np.ndarray
    z_scores: np.ndarray
    born_rule_ok: np.ndarray
    average_errors: List[float]
    averages_ok: bool
    restricted_valid: List[bool]
    n_localized: int
    n_traj: int

    @property
    def passed(self):
        return bool(np.all(self.born_rule_ok) and self.averages_ok and all(self.restricted_valid))


def verify_update_rule(sys: QuantumSystem, rho0, ensemble: EnsembleStats, stationary,
                       infinite_projectors, labels=None, avg_tol=2e-2):
    """Check the asymptotic map ``rho0 -> rho_j`` with probability ``tr[P_inf_j rho0]``.

    `ensemble` must track the supports of `stationary` as its projectors,
    in order, and its time averages should start after localization.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.ndim == 1:
        rho0 = np.outer(rho0, rho0.conj())
    loc = localized_mask(ensemble.overlap_series)
    n, k = loc.shape
    pred = np.array([float(np.trace(P @ rho0).real) for P in infinite_projectors])
    freq = loc.mean(axis=0)
    z, ok = np.zeros(k), np.zeros(k, dtype=bool)
    for j in range(k):
        _, z[j], ok[j] = binomial_check(freq[j], pred[j], n)
    errs = []
    for b, j in zip(*np.nonzero(loc)):
        errs.append(float(np.linalg.norm(ensemble.mean_fidelity_inputs[b] - stationary.states[j])))
    valid = []
    for P in stationary.supports:
        V = support(P, 0.5)
        try:
            new_system(dag(V) @ sys.hamiltonian @ V, [dag(V) @ L @ V for L in sys.jumps])
            valid.append(True)
        except NonHermitianHamiltonian:
            valid.append(False)
    labels = list(labels) if labels is not None else [f"Q{j + 1}" for j in range(k)]
    return UpdateRuleReport(labels, freq, pred, z, ok, errs,
                            bool(all(e <= avg_tol for e in errs)), valid,
                            int(loc.any(axis=1).sum()), n)


# -- JSON -------------------------------------------------------------------------

def to_jsonable(obj):
    """Convert report dataclasses / numpy values into plain JSON types."""
    if hasattr(obj, "__dataclass_fields__"):
        obj = asdict(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return to_jsonable(np.stack([obj.real, obj.imag], axis=-1))
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj
