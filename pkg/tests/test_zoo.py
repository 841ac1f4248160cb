import warnings

import numpy as np
import pytest

from conftest import dm
from qtraj import zoo
from qtraj.errors import ValidationError
from qtraj.lindblad import apply_generator
from qtraj.structure import detect_dfs


def _comm(A, B):
    return A @ B - B @ A


def test_spin1_operators():
    sx, sy, sz, sp, sm = zoo.spin1_operators()
    np.testing.assert_allclose(sz, np.diag([-1, 0, 1]))
    np.testing.assert_allclose(_comm(sx, sy), 1j * sz, atol=1e-14)
    np.testing.assert_allclose(sx @ sx + sy @ sy + sz @ sz, 2 * np.eye(3), atol=1e-14)
    np.testing.assert_allclose(sp, sm.conj().T)


def test_embed_orders_sites_left_to_right():
    op = zoo.embed(zoo.SIGMA_PLUS, 1, 2, 2)
    np.testing.assert_allclose(op @ zoo.bitstring_ket("00"), zoo.bitstring_ket("10"))


def test_qubit_preset():
    sys, spec = zoo.build_preset("qubit")
    assert spec.params == {"omega": 1.0, "gamma": 0.7} and spec.dim == 2
    np.testing.assert_allclose(_comm(sys.hamiltonian, sys.jumps[0]), 0)
    closed = zoo.build_monitored_qubit(1.0, 0.0)
    assert np.linalg.norm(closed.jumps[0]) == 0


def test_two_qubit_dark_states(two_qubit):
    for q in zoo.two_qubit_dark_states():
        assert np.linalg.norm(two_qubit.jumps[0] @ q) < 1e-15
    assert zoo.PRESET_DEFAULTS["two-qubit-dark"]["gamma"] == 0.2


def test_kerr_parity_conservation(kerr):
    Pe, _ = zoo.parity_projectors(20)
    assert np.linalg.norm(_comm(kerr.hamiltonian, Pe)) < 1e-12
    L = kerr.jumps[0]
    assert np.linalg.norm(_comm(L, Pe)) < 1e-12


def test_kerr_cat_states_are_stationary():
    p = zoo.PRESET_DEFAULTS["kerr"]
    n = 30
    sys = zoo.build_kerr(0.0, p["pump"], p["kerr"], p["gamma"], n)
    cp, cm = zoo.kerr_cat_states(0.0, p["pump"], p["kerr"], p["gamma"], n)
    for c in (cp, cm):
        assert np.linalg.norm(apply_generator(sys, dm(c))) < 1e-6
    alpha2 = zoo.kerr_cat_amplitude(0.0, p["pump"], p["kerr"], p["gamma"]) ** 2
    np.testing.assert_allclose(alpha2, -p["pump"] / (p["kerr"] - 1j * p["gamma"]))
    # without Kerr term the modulus reduces to pump / gamma
    assert abs(zoo.kerr_cat_amplitude(0.0, 1.75, 0.0, 0.5)) ** 2 == pytest.approx(3.5)


def test_fock_leakage_warns():
    with pytest.warns(RuntimeWarning):
        zoo.fock_leakage(zoo.basis_ket(18, 20), 20)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert zoo.fock_leakage(zoo.basis_ket(9, 20), 20) == 0.0


def test_scar_states_are_dark_for_bond_channels(scar):
    for s in zoo.scar_tower(2):
        for L in scar.jumps[:-1]:
            assert np.linalg.norm(L @ s) < 1e-12


def test_scar_dephasing_expectations(scar):
    Lz = scar.jumps[-1]
    vals = [np.vdot(s, Lz.conj().T @ Lz @ s).real for s in zoo.scar_tower(2)]
    np.testing.assert_allclose(vals, [4.0, 0.0, 4.0], atol=1e-10)


def test_scar_tower_is_orthonormal():
    S = np.stack(zoo.scar_tower(3), axis=1)
    np.testing.assert_allclose(S.conj().T @ S, np.eye(4), atol=1e-12)


def test_ring_preset_and_mode_rule():
    sys, spec = zoo.build_preset("xx-ring")
    assert sys.dim == 64 and len(sys.jumps) == 2
    assert not zoo.ring_unique_mode(6, [1, 2])
    assert zoo.ring_unique_mode(6, [1, 4])
    assert zoo.ring_unique_mode(5, [3])
    with pytest.raises(ValidationError):
        zoo.build_xx_ring(6, 1.0, 1.0, 0.4, [1, 7])


def test_ring_bell_modes_are_protected():
    sys, _ = zoo.build_preset("xx-ring")
    for v in zoo.ring_bell_modes():
        Hv = sys.hamiltonian @ v
        assert np.linalg.norm(Hv - np.vdot(v, Hv) * v) < 1e-12
        for L in sys.jumps:
            Lv = L @ v
            assert np.linalg.norm(Lv - np.vdot(v, Lv) * v) < 1e-12
    rep = detect_dfs(sys)
    assert len(rep.dfs_states) == 6 and len(rep.grouping) == 2


def test_classical_noise_system():
    s = zoo.classical_noise_system(zoo.SIGMA_Z, [zoo.SIGMA_X], [0.4])
    L = s.jumps[0]
    np.testing.assert_allclose(L, -1j * zoo.SIGMA_X + 0.4 * np.eye(2))
    ref = zoo.classical_noise_system(zoo.SIGMA_Z, [zoo.SIGMA_X])
    rho = dm([0.6, 0.8])
    np.testing.assert_allclose(apply_generator(s, rho), apply_generator(ref, rho), atol=1e-14)


def test_preset_validation():
    with pytest.raises(ValidationError):
        zoo.build_preset("nope")
    with pytest.raises(ValidationError) as e:
        zoo.preset_spec("kerr", gamma=-1.0, n_fock=0, bogus=2)
    assert len(e.value.violations) == 3
    _, spec = zoo.build_preset("scar")
    assert spec.params["h"] == 1.0 and spec.params["D"] == 1.3


def test_preset_initial_states():
    for name in zoo.PRESET_DEFAULTS:
        sys, _ = zoo.build_preset(name)
        psi = zoo.preset_initial_state(name, sys)
        assert psi.shape == (sys.dim,)
        assert np.linalg.norm(psi) == pytest.approx(1.0)
    np.testing.assert_allclose(zoo.preset_initial_state("xx-ring", None),
                               zoo.bitstring_ket("010000"))
