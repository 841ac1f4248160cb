"""Operator builders and preset monitored systems.

Conventions
-----------
* Qubits: ``|0>`` is the ground state, ``sigma_minus = |0><1|``,
  ``sigma_z = diag(-1, +1)`` so that ``sigma_z = s+ s- - s- s+``.
* Spin 1: basis ``m = -1, 0, +1`` in ascending order, ``<m+1|S+|m> = sqrt(2)``.
* Multi-site operators place site 1 in the leftmost Kronecker factor, and
  sites are numbered from 1.
* Bosons: Fock basis ``|0>, ..., |n_fock - 1>``; the truncated ladder
  operators violate ``[a, a^+] = 1`` on the top level.
"""
import warnings
from dataclasses import dataclass, field
from functools import reduce
from typing import Dict

import numpy as np

from .errors import InputError, ValidationError
from .linalg import dag, orthonormalize
from .system import QuantumSystem, new_system

# -- single-site operators ------------------------------------------------------

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.diag([-1.0, 1.0]).astype(complex)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.T.copy()


def spin1_operators():
    """``(Sx, Sy, Sz, S+, S-)`` for spin 1 in the ascending-m basis."""
    sp = np.zeros((3, 3), dtype=complex)
    sp[1, 0] = sp[2, 1] = np.sqrt(2.0)
    sm = dag(sp)
    sz = np.diag([-1.0, 0.0, 1.0]).astype(complex)
    return (sp + sm) / 2, (sp - sm) / 2j, sz, sp, sm


def destroy(n_fock):
    """Truncated annihilation operator."""
    return np.diag(np.sqrt(np.arange(1, n_fock)), 1).astype(complex)


def embed(op, site, n_sites, local_dim):
    """Operator acting as `op` on `site` (1-based) and identity elsewhere."""
    if not 1 <= site <= n_sites:
        raise InputError(f"site {site} outside 1..{n_sites}")
    eye = np.eye(local_dim, dtype=complex)
    return reduce(np.kron, [op if j == site else eye for j in range(1, n_sites + 1)])


def basis_ket(index, dim):
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def product_ket(*locals_):
    return reduce(np.kron, [np.asarray(v, dtype=complex) for v in locals_])


def bitstring_ket(bits):
    """Computational basis ket from a string like ``"010000"``."""
    idx = int(bits, 2)
    return basis_ket(idx, 2 ** len(bits))


# -- presets --------------------------------------------------------------------

def _nonneg(**kw):
    bad = [f"{k} must be >= 0 (got {v})" for k, v in kw.items() if v < 0]
    if bad:
        raise ValidationError(bad)


def build_monitored_qubit(omega, gamma):
    """``H = omega sigma_z``, ``L = sqrt(gamma) s+ s-`` (population monitoring)."""
    _nonneg(gamma=gamma)
    H = omega * SIGMA_Z
    L = np.sqrt(gamma) * SIGMA_PLUS @ SIGMA_MINUS
    return new_system(H, [L], labels=["population"])


def build_two_qubit_dark(omega0, gamma):
    """Two qubits with collective decay ``L = sqrt(gamma)(s1- + s2-)``."""
    _nonneg(gamma=gamma)
    H = 0.5 * omega0 * (embed(SIGMA_Z, 1, 2, 2) + embed(SIGMA_Z, 2, 2, 2))
    L = np.sqrt(gamma) * (embed(SIGMA_MINUS, 1, 2, 2) + embed(SIGMA_MINUS, 2, 2, 2))
    return new_system(H, [L], labels=["collective-decay"])


def two_qubit_initial_state(theta=np.pi / 4, phase=np.pi / 3):
    """``(c|0> + s|1>) (x) (c|0> + e^{-i phase} s|1>)`` with c, s = cos, sin(theta)."""
    c, s = np.cos(theta), np.sin(theta)
    return product_ket([c, s], [c, np.exp(-1j * phase) * s])


def two_qubit_dark_states():
    """``|00>`` and the singlet ``(|10> - |01>)/sqrt 2``."""
    q1 = bitstring_ket("00")
    q2 = (bitstring_ket("10") - bitstring_ket("01")) / np.sqrt(2)
    return q1, q2


def build_kerr(delta, pump, kerr, gamma, n_fock):
    """Two-photon driven Kerr resonator in a truncated Fock space.

    ``H = -delta n + (pump a+^2 + conj(pump) a^2)/2 + kerr/2 a+ a+ a a``,
    ``L = sqrt(gamma) a^2``.
    """
    if int(n_fock) < 4:
        raise ValidationError("n_fock must be at least 4")
    _nonneg(gamma=gamma)
    a = destroy(int(n_fock))
    ad = dag(a)
    H = (-delta * ad @ a + 0.5 * (pump * ad @ ad + np.conj(pump) * a @ a)
         + 0.5 * kerr * ad @ ad @ a @ a)
    return new_system(H, [np.sqrt(gamma) * a @ a], labels=["two-photon-loss"])


def parity_projectors(n_fock):
    """(even, odd) photon-number parity projectors."""
    even = np.diag((np.arange(n_fock) % 2 == 0).astype(float)).astype(complex)
    return even, np.eye(n_fock) - even


def coherent_state(alpha, n_fock):
    """Truncated, renormalized coherent state."""
    n = np.arange(n_fock)
    logfact = np.cumsum(np.log(np.maximum(n, 1)))
    amp = np.exp(-0.5 * abs(alpha) ** 2 - 0.5 * logfact) * (alpha + 0j) ** n
    return amp / np.linalg.norm(amp)


def kerr_cat_amplitude(delta, pump, kerr, gamma):
    """Coherent amplitude of the resonant (delta = 0) cat manifold.

    A coherent state is annihilated by ``a^2 - alpha^2`` and the dark-state
    condition gives ``alpha^2 = -pump / (kerr - i gamma)``; for ``kerr = 0``
    this has modulus ``pump / gamma``.
    """
    if delta != 0:
        raise InputError("cat manifold only exists at zero detuning")
    return np.sqrt(-pump / (kerr - 1j * gamma) + 0j)


def kerr_cat_states(delta, pump, kerr, gamma, n_fock):
    """Even and odd cat states ``|c+-> ~ |alpha> +- |-alpha>``."""
    alpha = kerr_cat_amplitude(delta, pump, kerr, gamma)
    a, b = coherent_state(alpha, n_fock), coherent_state(-alpha, n_fock)
    plus, minus = a + b, a - b
    return plus / np.linalg.norm(plus), minus / np.linalg.norm(minus)


FOCK_MARGIN = 5
LEAKAGE_WARN = 1e-6


def fock_leakage(state, n_fock, margin=FOCK_MARGIN):
    """Population in the top `margin` Fock levels; warns above 1e-6."""
    state = np.asarray(state, dtype=complex)
    pops = np.abs(state) ** 2 if state.ndim == 1 else np.diag(state).real
    leak = float(np.sum(pops[n_fock - margin:]))
    if leak > LEAKAGE_WARN:
        warnings.warn(f"Fock truncation leakage {leak:.2e} in the top {margin} levels",
                      RuntimeWarning, stacklevel=2)
    return leak


def _spin_chain_ops(n_sites):
    sx, sy, sz, sp, _ = spin1_operators()
    return ([embed(o, j, n_sites, 3) for j in range(1, n_sites + 1)] for o in (sx, sy, sz, sp))


def build_scar_chain(n_sites, h, D, gamma_dephasing=0.0):
    """Spin-1 XY chain with scar-preserving dissipators (open boundary).

    ``H = sum_bonds (Sx Sx + Sy Sy) + h sum Sz + D sum Sz^2`` and
    ``L_k = Sx_k (Sx_k Sx_{k+1} + Sy_k Sy_{k+1})`` for ``k = 1..n-1``.
    A positive `gamma_dephasing` adds ``L_z = sqrt(gamma) sum_j Sz_j``.
    """
    if n_sites < 2:
        raise ValidationError("n_sites must be at least 2")
    _nonneg(gamma_dephasing=gamma_dephasing)
    X, Y, Z, _ = _spin_chain_ops(n_sites)
    H = sum(X[j] @ X[j + 1] + Y[j] @ Y[j + 1] for j in range(n_sites - 1))
    H = H + h * sum(Z) + D * sum(z @ z for z in Z)
    jumps = [X[k] @ (X[k] @ X[k + 1] + Y[k] @ Y[k + 1]) for k in range(n_sites - 1)]
    labels = [f"bond{k + 1}" for k in range(n_sites - 1)]
    if gamma_dephasing > 0:
        jumps.append(np.sqrt(gamma_dephasing) * sum(Z))
        labels.append("dephasing")
    return new_system(H, jumps, labels=labels)


def scar_tower(n_sites):
    """Normalized scar states ``s_n ~ (Q+)^n |-1,...,-1>``, n = 0..n_sites."""
    _, _, _, P = _spin_chain_ops(n_sites)
    Qd = sum((-1) ** j * P[j - 1] @ P[j - 1] for j in range(1, n_sites + 1))
    s = basis_ket(0, 3 ** n_sites)
    out = []
    for _ in range(n_sites + 1):
        out.append(s / np.linalg.norm(s))
        s = Qd @ s
    return out


def scar_initial_state(sys: QuantumSystem, decaying_projector):
    """Uniform computational superposition projected onto the decaying space."""
    psi = decaying_projector @ np.ones(sys.dim, dtype=complex)
    n = np.linalg.norm(psi)
    if n < 1e-12:
        raise InputError("uniform state has no decaying component")
    return psi / n


def build_xx_ring(n_sites, omega, J, gamma, monitored_sites):
    """Periodic XX ring with ``sigma_z`` dephasing at the monitored sites.

    ``H = omega sum sz_k + J sum (s+_j s-_{j+1} + h.c.)`` and
    ``L = sqrt(gamma) sz_u`` for each (1-based, deduplicated) site u.
    """
    if n_sites < 3:
        raise ValidationError("a ring needs at least 3 sites")
    _nonneg(gamma=gamma)
    sites = list(dict.fromkeys(int(s) for s in monitored_sites))
    bad = [f"site {s} outside 1..{n_sites}" for s in sites if not 1 <= s <= n_sites]
    if bad:
        raise ValidationError(bad)
    Z = [embed(SIGMA_Z, j, n_sites, 2) for j in range(1, n_sites + 1)]
    P = [embed(SIGMA_PLUS, j, n_sites, 2) for j in range(1, n_sites + 1)]
    H = omega * sum(Z)
    for j in range(n_sites):
        k = (j + 1) % n_sites
        hop = P[j] @ dag(P[k])
        H = H + J * (hop + dag(hop))
    jumps = [np.sqrt(gamma) * Z[s - 1] for s in sites]
    return new_system(H, jumps, labels=[f"sz{s}" for s in sites])


def ring_unique_mode(n_sites, monitored_sites):
    """Does the dephasing placement leave a single protected eigenmode?

    True for a 5-site ring monitored at one site, and for rings whose size
    is a multiple of 6 monitored at two sites three apart.
    """
    sites = sorted(set(int(s) for s in monitored_sites))
    if n_sites == 5:
        return len(sites) == 1
    if n_sites % 6 == 0 and len(sites) == 2:
        return (sites[1] - sites[0]) % n_sites in (3, n_sites - 3)
    return False


def ring_bell_modes(n_sites=6):
    """Single-excitation modes ``(0, a, a, 0, -a, -a)`` and ``(0, a, -a, 0, a, -a)``.

    These are the protected single-particle modes of the 6-ring with
    dephasing at sites 1 and 4, written in the one-excitation sector.
    """
    if n_sites != 6:
        raise InputError("bell modes are tabulated for the 6-site ring only")
    modes = []
    for amps in ((0, 1, 1, 0, -1, -1), (0, 1, -1, 0, 1, -1)):
        v = np.zeros(2 ** n_sites, dtype=complex)
        for site, c in enumerate(amps, start=1):
            bits = ["0"] * n_sites
            bits[site - 1] = "1"
            v[int("".join(bits), 2)] = c
        modes.append(v / np.linalg.norm(v))
    return modes


def classical_noise_system(H, hermitian_noise, shifts=None):
    """Unraveling of classical noise: ``L_k = -i V_k + a_k`` with real shifts.

    A shift ``a_k`` adds ``a_k V_k`` to the effective Hamiltonian of the
    Lindblad equation, so it is subtracted from `H` here. The averaged
    dynamics is then ``-i[H, rho] + sum_k D[V_k] rho`` for every choice of
    shifts; only the readout offset of the diffusive record changes.
    """
    V = [np.asarray(v, dtype=complex) for v in hermitian_noise]
    shifts = [0.0] * len(V) if shifts is None else [float(a) for a in shifts]
    if len(shifts) != len(V):
        raise InputError("need one shift per noise operator")
    H = np.asarray(H, dtype=complex)
    d = H.shape[0]
    H_eff = H - sum((a * v for v, a in zip(V, shifts)), np.zeros_like(H))
    jumps = [-1j * v + a * np.eye(d) for v, a in zip(V, shifts)]
    return new_system(H_eff, jumps, labels=[f"noise{k + 1}" for k in range(len(V))])


# -- registry -------------------------------------------------------------------

@dataclass
class PresetSpec:
    name: str
    params: Dict[str, float] = field(default_factory=dict)
    dim: int = 0


PRESET_DEFAULTS = {
    "qubit": {"omega": 1.0, "gamma": 0.7},
    "two-qubit-dark": {"omega0": 1.0, "gamma": 0.2},
    "kerr": {"delta": 2.0, "pump": 1.75, "kerr": 1 / 3, "gamma": 0.5, "n_fock": 20},
    "scar": {"n_sites": 2, "h": 1.0, "D": 1.3, "gamma_dephasing": 1.0},
    "xx-ring": {"n_sites": 6, "omega": 1.0, "J": 1.0, "gamma": 0.4, "site_u": 1, "site_v": 4},
}

_POSITIVE = {"n_fock", "n_sites", "site_u", "site_v"}
_NONNEG = {"gamma", "gamma_dephasing"}


def _build(name, p):
    if name == "qubit":
        return build_monitored_qubit(p["omega"], p["gamma"])
    if name == "two-qubit-dark":
        return build_two_qubit_dark(p["omega0"], p["gamma"])
    if name == "kerr":
        return build_kerr(p["delta"], p["pump"], p["kerr"], p["gamma"], int(p["n_fock"]))
    if name == "scar":
        return build_scar_chain(int(p["n_sites"]), p["h"], p["D"], p["gamma_dephasing"])
    return build_xx_ring(int(p["n_sites"]), p["omega"], p["J"], p["gamma"],
                         [int(p["site_u"]), int(p["site_v"])])


def preset_spec(name, **overrides):
    """Validated :class:`PresetSpec` with defaults filled in."""
    if name not in PRESET_DEFAULTS:
        raise ValidationError(f"unknown preset {name!r}; choose from {sorted(PRESET_DEFAULTS)}")
    params = dict(PRESET_DEFAULTS[name])
    problems = []
    for k, v in overrides.items():
        if k not in params:
            problems.append(f"preset {name!r} has no parameter {k!r}")
            continue
        params[k] = float(v)
    for k, v in params.items():
        if k in _POSITIVE and v <= 0:
            problems.append(f"{k} must be positive")
        if k in _NONNEG and v < 0:
            problems.append(f"{k} must be non-negative")
    if problems:
        raise ValidationError(problems)
    return PresetSpec(name, params, 0)


def build_preset(name, **overrides):
    """Return ``(system, PresetSpec)`` for a named preset."""
    spec = preset_spec(name, **overrides)
    sys = _build(name, spec.params)
    spec.dim = sys.dim
    return sys, spec


def preset_initial_state(name, sys: QuantumSystem, params=None):
    """Default initial ket of each preset, as used by the reproduce pipelines."""
    params = dict(PRESET_DEFAULTS[name], **(params or {}))
    if name == "qubit":
        return np.array([1, 1], dtype=complex) / np.sqrt(2)
    if name == "two-qubit-dark":
        return two_qubit_initial_state()
    if name == "kerr":
        n = int(params["n_fock"])
        psi = (basis_ket(8, n) + basis_ket(9, n)) / np.sqrt(2)
        fock_leakage(psi, n)
        return psi
    if name == "scar":
        from .structure import split_decaying_asymptotic
        P_D, _ = split_decaying_asymptotic(sys)
        return scar_initial_state(sys, P_D)
    n = int(params["n_sites"])
    return bitstring_ket("0" + "1" + "0" * (n - 2))


def scar_projectors(n_sites):
    return [np.outer(s, s.conj()) for s in scar_tower(n_sites)]


def orthonormal_scars(n_sites):
    return orthonormalize(np.stack(scar_tower(n_sites), axis=1))
