import numpy as np
import pytest

from conftest import dm, ket
from qtraj import zoo
from qtraj.analytics import (binomial_check, check_invariant_diffusive, check_invariant_jump,
                             classify_incomplete_localization, concurrence, concurrence_batch,
                             fidelity, l1_coherence, localization_statistics, make_observable,
                             mean_fidelity, participation_ratio, reduced_density,
                             subspace_overlap, verify_update_rule)
from qtraj.errors import NotAProjector, UnknownObservable, WeightNormalization
from qtraj.linalg import random_density
from qtraj.structure import find_all_stationary_states, infinite_time_projector
from qtraj.system import new_system
from qtraj.unravel import run_ensemble
from qtraj.zoo import SIGMA_X, SIGMA_Z

P0 = dm([1, 0])


def test_subspace_overlap_cases(rng):
    rho = random_density(3, rng)
    assert subspace_overlap(rho, np.eye(3)) == pytest.approx(1.0)
    P = np.diag([1.0, 1.0, 0.0])
    assert subspace_overlap(np.diag([0.5, 0.5, 0]), P) == pytest.approx(1.0)
    assert subspace_overlap(dm(ket(1, 1)), P0) == pytest.approx(0.5)
    with pytest.raises(NotAProjector):
        subspace_overlap(rho, np.diag([0.5, 1.0, 0.0]))


def test_binomial_check():
    se, z, ok = binomial_check(0.55, 0.5, 100)
    assert se == pytest.approx(0.05) and z == pytest.approx(1.0) and ok
    assert not binomial_check(0.7, 0.5, 100)[2]
    assert binomial_check(1.0, 1.0, 10)[2]


def test_localization_inside_single_block(qubit):
    ens = run_ensemble(qubit, ket(1, 0), "diffusive", 20, 2.0, dt=1e-3, base_seed=1,
                       projectors=[P0, dm([0, 1])])
    rep = localization_statistics(ens, [1.0, 0.0])
    assert rep.frequencies[0] == 1.0 and rep.passed


def test_invariance_qubit_states(qubit):
    for rho in (dm([1, 0]), dm([0, 1])):
        assert check_invariant_diffusive(qubit, rho).invariant
        assert check_invariant_jump(qubit, rho).invariant
    assert not check_invariant_diffusive(qubit, dm(ket(1, 1))).invariant


def _recipe_system(h12_scale=1.0):
    # invariant subspace span{|0>,|1>} carrying rho = diag(0.6, 0.4); the block
    # of L on it is z*1 plus an anti-Hermitian part commuting with rho, and the
    # Hamiltonian coupling to |2> cancels the non-Hermitian leakage
    L = np.zeros((3, 3), complex)
    L11 = 0.3 * np.eye(2) + 1j * np.diag([0.5, -0.2])
    L[:2, :2] = L11
    L[:2, 2] = [0.7, 0.2 - 0.4j]
    L[2, 2] = 0.9
    H = np.zeros((3, 3), complex)
    H[:2, :2] = np.diag([1.0, 2.0])
    H12 = -0.5j * L11.conj().T @ L[:2, 2] * h12_scale
    H[:2, 2] = H12
    H[2, :2] = H12.conj()
    H[2, 2] = 0.3
    return new_system(H, [L]), np.diag([0.6, 0.4, 0.0]).astype(complex)


def test_invariance_constructive_recipe():
    s, rho = _recipe_system()
    assert check_invariant_diffusive(s, rho).invariant
    s_bad, _ = _recipe_system(h12_scale=0.5)
    assert not check_invariant_diffusive(s_bad, rho).invariant


def test_invariance_unitary_jump_case():
    s = new_system(SIGMA_X, [SIGMA_Z])
    rho = np.eye(2) / 2
    assert check_invariant_jump(s, rho).invariant


def test_invariance_generic_rejection(rng):
    H = rng.standard_normal((3, 3))
    s = new_system(H + H.T, [rng.standard_normal((3, 3))])
    assert not check_invariant_diffusive(s, random_density(3, rng)).invariant
    assert not check_invariant_jump(s, random_density(3, rng)).invariant


def test_classify_kerr():
    p = zoo.PRESET_DEFAULTS["kerr"]
    cat_sys = zoo.build_kerr(0.0, p["pump"], p["kerr"], p["gamma"], 30)
    cp, cm = zoo.kerr_cat_states(0.0, p["pump"], p["kerr"], p["gamma"], 30)
    assert classify_incomplete_localization(cat_sys, dm(cp), dm(cm), "diffusive") == "case-i"
    sys, _ = zoo.build_preset("kerr")
    Pe, Po = zoo.parity_projectors(20)
    assert classify_incomplete_localization(sys, Pe, Po, "diffusive") == "complete-expected"


def test_classify_ring_jump_is_degenerate():
    sys, _ = zoo.build_preset("xx-ring")
    from qtraj.structure import detect_dfs
    from qtraj.linalg import projector
    PQ = projector(np.stack(detect_dfs(sys).dfs_states, axis=1))
    PP = np.eye(sys.dim) - PQ
    assert classify_incomplete_localization(sys, PQ, PP, "jump") == "case-i"
    assert classify_incomplete_localization(sys, PQ, PP, "diffusive") == "complete-expected"


def test_fidelity_and_participation_ratio(rng):
    rho = random_density(3, rng)
    assert fidelity(rho, rho) == pytest.approx(1.0)
    assert fidelity(dm([1, 0]), dm([0, 1])) == pytest.approx(0.0, abs=1e-12)
    assert fidelity(dm([1, 0]), np.eye(2) / 2) == pytest.approx(0.5)
    assert participation_ratio([1, 0, 0]) == 1.0
    assert participation_ratio([0.25] * 4) == pytest.approx(0.25)
    assert participation_ratio([0.5, 0.5]) == pytest.approx(0.5)
    with pytest.raises(WeightNormalization):
        participation_ratio([0.5, 0.6])


def test_mean_fidelity_unique_state():
    s = new_system(SIGMA_X, [np.sqrt(2.0) * SIGMA_Z])
    ens = run_ensemble(s, ket(1, 0), "diffusive", 4, 300.0, dt=2e-3, base_seed=4, stride=50,
                       t_burn=5.0, keep_mean=False)
    rep = mean_fidelity(ens, np.eye(2) / 2, [1.0])
    assert rep.mean_fidelity == pytest.approx(1.0, abs=2e-2)
    assert rep.participation_ratio == 1.0


def test_l1_coherence():
    assert l1_coherence(np.diag([0.3, 0.7]), np.eye(2)) == 0.0
    s = zoo.orthonormal_scars(2)
    psi = (s[:, 0] + s[:, 1]) / np.sqrt(2)
    assert l1_coherence(dm(psi), list(s.T)) == pytest.approx(1.0)


def _wootters_werner(p):
    # the Werner state is invariant under spin flip, so the square roots of
    # the eigenvalues of rho * rho~ are the eigenvalues of rho itself
    lam = sorted([(1 + 3 * p) / 4] + [(1 - p) / 4] * 3, reverse=True)
    return max(0.0, lam[0] - sum(lam[1:]))


def test_concurrence_values():
    assert concurrence(dm(zoo.bitstring_ket("01"))) == pytest.approx(0.0, abs=1e-12)
    bell = (zoo.bitstring_ket("10") - zoo.bitstring_ket("01")) / np.sqrt(2)
    assert concurrence(dm(bell)) == pytest.approx(1.0)
    for p in (0.2, 1 / 3, 0.5, 0.9):
        rho = p * dm(bell) + (1 - p) * np.eye(4) / 4
        assert concurrence(rho) == pytest.approx(_wootters_werner(p), abs=1e-12)
    assert _wootters_werner(0.5) == pytest.approx(0.25)


def test_concurrence_of_pair_in_register(rng):
    bell = (zoo.bitstring_ket("10") - zoo.bitstring_ket("01")) / np.sqrt(2)
    psi = np.kron(np.kron([1, 0], bell), [0, 1])   # qubits 2 and 3 entangled
    rho = dm(psi)
    assert concurrence(rho, pair=(2, 3), n_qubits=4) == pytest.approx(1.0)
    assert concurrence(rho, pair=(1, 4), n_qubits=4) == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(reduced_density(rho, [2, 3], 4), dm(bell), atol=1e-12)
    rhos = np.stack([random_density(8, rng) for _ in range(5)])
    batch = concurrence_batch(rhos, (1, 3), 3)
    single = [concurrence(r, pair=(1, 3), n_qubits=3) for r in rhos]
    np.testing.assert_allclose(batch, single, atol=1e-10)


def test_make_observable():
    rhos = np.stack([dm(ket(1, 1)), dm([1, 0])])
    np.testing.assert_allclose(make_observable("sx", 2)(rhos), [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(make_observable("sz", 2)(rhos), [0.0, -1.0], atol=1e-12)
    np.testing.assert_allclose(make_observable("purity", 2)(rhos), [1.0, 1.0])
    np.testing.assert_allclose(make_observable("overlap", 2, projector=P0)(rhos), [0.5, 1.0])
    with pytest.raises(UnknownObservable):
        make_observable("entropy", 2)


def test_update_rule_reduces_to_measurement(qubit):
    n = 200
    projs = [P0, dm([0, 1])]
    ens = run_ensemble(qubit, ket(1, 1), "diffusive", n, 40.0, dt=1e-3, base_seed=17,
                       projectors=projs, t_burn=20.0)
    _, sset = find_all_stationary_states(qubit)
    order = [int(np.argmax([np.trace(P @ r).real for r in sset.states])) for P in projs]
    sset.states = [sset.states[i] for i in order]
    sset.supports = [sset.supports[i] for i in order]
    inf = [infinite_time_projector(qubit, P) for P in projs]
    rep = verify_update_rule(qubit, ket(1, 1), ens, sset, inf)
    np.testing.assert_allclose(rep.predicted, [0.5, 0.5], atol=1e-10)
    assert rep.passed and rep.n_localized == n
    # a state inside one block is always selected
    ens1 = run_ensemble(qubit, ket(0, 1), "jump", 10, 2.0, dt=1e-3, projectors=projs)
    rep1 = verify_update_rule(qubit, ket(0, 1), ens1, sset, inf)
    np.testing.assert_allclose(rep1.frequencies, [0.0, 1.0])
