import numpy as np
import pytest

from conftest import dm
from qtraj import zoo
from qtraj.errors import DegenerateBlock
from qtraj.lindblad import apply_generator, propagate_adjoint
from qtraj.linalg import projector
from qtraj.structure import (commutant_basis, detect_dfs, find_all_stationary_states,
                             infinite_time_projector, simultaneous_block_diagonalize,
                             split_decaying_asymptotic, stationary_state_in, structure_report,
                             system_operators, trajectory_steady_state_finder)
from qtraj.system import new_system
from qtraj.zoo import SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Z


def _block_diag_residual(dec, ops):
    T = dec.transform
    worst = 0.0
    for A in ops:
        B = T.conj().T @ A @ T
        mask = np.ones_like(B, dtype=bool)
        for s, n in dec.blocks:
            mask[s:s + n, s:s + n] = False
        worst = max(worst, np.abs(B[mask]).max(initial=0.0))
    return worst


def test_sbd_two_one_dim_blocks():
    ops = [SIGMA_Z, SIGMA_PLUS @ SIGMA_MINUS]
    dec = simultaneous_block_diagonalize(ops)
    assert dec.block_sizes() == [1, 1]
    assert _block_diag_residual(dec, ops) < 1e-12


def test_sbd_irreducible_pair():
    dec = simultaneous_block_diagonalize([SIGMA_X, SIGMA_Z])
    assert dec.block_sizes() == [2]


def test_sbd_random_hidden_blocks(rng):
    # three irreducible blocks of sizes 1, 2, 3 hidden by a random unitary
    sizes = [1, 2, 3]
    ops = []
    for _ in range(3):
        M = np.zeros((6, 6), complex)
        s = 0
        for n in sizes:
            M[s:s + n, s:s + n] = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            s += n
        ops.append(M)
    Q, _ = np.linalg.qr(rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
    ops = [Q @ M @ Q.conj().T for M in ops]
    dec = simultaneous_block_diagonalize(ops, seed=3)
    assert sorted(dec.block_sizes()) == sizes
    assert _block_diag_residual(dec, ops) < 1e-9
    assert np.allclose(dec.transform.conj().T @ dec.transform, np.eye(6), atol=1e-10)


def test_commutant_routes_agree(rng):
    ops = system_operators(zoo.build_two_qubit_dark(1.0, 0.2))
    a = commutant_basis(ops, method="dense")
    b = commutant_basis(ops, method="reduced", rng=rng)
    assert len(a) == len(b)


def test_isomorphic_blocks_flagged_as_family():
    s = new_system(np.kron(SIGMA_Z, np.eye(2)), [np.kron(SIGMA_MINUS, np.eye(2))])
    dec = simultaneous_block_diagonalize(system_operators(s))
    assert dec.commutant_dim == 4
    assert dec.families == [[0, 1]]
    assert set(dec.roles) == {"unresolved"}


def test_ring_block_structure():
    sys, _ = zoo.build_preset("xx-ring")
    sizes = [sorted(simultaneous_block_diagonalize(system_operators(sys), seed=s).block_sizes())
             for s in (0, 5)]
    assert sizes[0] == sizes[1]
    assert len(sizes[0]) == 18 and sizes[0].count(1) == 6
    rest = [n for n in sizes[0] if n > 1]
    assert set(rest) <= {3, 4, 6, 9} and sum(rest) == 58


def test_split_decaying(qubit, two_qubit, kerr):
    P_D, P_R = split_decaying_asymptotic(qubit)
    assert np.linalg.norm(P_D) < 1e-12
    np.testing.assert_allclose(P_R, np.eye(2), atol=1e-12)
    P_D, _ = split_decaying_asymptotic(two_qubit)
    psi1 = zoo.bitstring_ket("11")
    psi2 = (zoo.bitstring_ket("10") + zoo.bitstring_ket("01")) / np.sqrt(2)
    np.testing.assert_allclose(P_D, dm(psi1) + dm(psi2), atol=1e-8)
    P_D, _ = split_decaying_asymptotic(kerr)
    assert np.linalg.norm(P_D) < 1e-8


def _match(states, targets, tol):
    for t in targets:
        assert min(np.linalg.norm(r - t) for r in states) < tol


def test_stationary_states_qubit_and_two_qubit(qubit, two_qubit):
    _, s = find_all_stationary_states(qubit)
    assert len(s) == 2
    _match(s.states, [dm([1, 0]), dm([0, 1])], 1e-10)
    dec, s = find_all_stationary_states(two_qubit)
    assert len(s) == 2
    _match(s.states, [dm(q) for q in zoo.two_qubit_dark_states()], 1e-7)
    assert max(s.residuals) < 1e-7
    assert dec.roles.count("decaying") >= 1


def test_stationary_states_scar(scar):
    _, s = find_all_stationary_states(scar)
    assert len(s) == 3
    _match(s.states, zoo.scar_projectors(2), 1e-6)
    for r in s.states:
        assert np.linalg.norm(apply_generator(scar, r)) < 1e-7


def test_kerr_parity_sector_states(kerr):
    _, s = find_all_stationary_states(kerr)
    assert len(s) == 2
    Pe, Po = zoo.parity_projectors(20)
    parities = sorted(round(np.trace(Pe @ r).real, 8) for r in s.states)
    assert parities == [0.0, 1.0]


def test_degenerate_block_is_reported(qubit):
    with pytest.raises(DegenerateBlock):
        stationary_state_in(qubit, np.eye(2))


def test_trajectory_finder_qubit(qubit):
    found = trajectory_steady_state_finder(qubit, budget=16, t_final=30.0, dt=1e-3, seed=1)
    assert len(found) == 2
    _match(found.states, [dm([1, 0]), dm([0, 1])], 1e-2)


def test_trajectory_finder_unique_state():
    s = new_system(SIGMA_X, [np.sqrt(0.5) * SIGMA_Z])
    found = trajectory_steady_state_finder(s, budget=4, t_final=20.0, dt=1e-3, seed=2)
    assert len(found) == 1
    np.testing.assert_allclose(found.states[0], np.eye(2) / 2, atol=1e-8)


def test_trajectory_finder_kerr(kerr):
    _, exact = find_all_stationary_states(kerr)
    found = trajectory_steady_state_finder(kerr, budget=64, t_final=10.0, dt=1e-3, seed=3)
    assert len(found) == 2
    _match(found.states, exact.states, 2e-2)


def test_dfs_qubit(qubit):
    rep = detect_dfs(qubit)
    assert len(rep.dfs_states) == 2
    assert sorted(map(len, rep.grouping)) == [1, 1]
    cs = sorted(abs(cvec[0]) for _, cvec in rep.eigenvalue_table)
    np.testing.assert_allclose(cs, [0.0, np.sqrt(0.7)], atol=1e-12)


def test_dfs_two_qubit_dark(two_qubit):
    rep = detect_dfs(two_qubit)
    assert len(rep.dfs_states) == 2 and len(rep.grouping) == 1
    for _, cvec in rep.eigenvalue_table:
        assert np.abs(cvec).max() < 1e-12


def test_dfs_scar_without_dephasing():
    rep = detect_dfs(zoo.build_scar_chain(2, 1.0, 1.3, 0.0))
    assert len(rep.dfs_states) == 3 and len(rep.grouping) == 1
    P = projector(np.stack(rep.dfs_states, axis=1))
    np.testing.assert_allclose(P, sum(zoo.scar_projectors(2)), atol=1e-8)


def test_infinite_time_projectors(qubit, two_qubit):
    np.testing.assert_allclose(infinite_time_projector(qubit, dm([1, 0])), dm([1, 0]),
                               atol=1e-10)
    q1, q2 = zoo.two_qubit_dark_states()
    np.testing.assert_allclose(infinite_time_projector(two_qubit, dm(q2)), dm(q2), atol=1e-8)
    # every decaying excitation cascades down to |00>
    psi1 = zoo.bitstring_ket("11")
    psi2 = (zoo.bitstring_ket("10") + zoo.bitstring_ket("01")) / np.sqrt(2)
    expect = dm(q1) + dm(psi1) + dm(psi2)
    got = infinite_time_projector(two_qubit, dm(q1))
    np.testing.assert_allclose(got, expect, atol=1e-8)
    np.testing.assert_allclose(got, propagate_adjoint(two_qubit, dm(q1), 200.0), atol=1e-8)


def test_structure_report_is_json_ready(qubit):
    import json
    dec, s = find_all_stationary_states(qubit)
    rep = structure_report(dec, s, detect_dfs(qubit))
    obj = json.loads(json.dumps(rep))
    assert len(obj["blocks"]) == 2 and len(obj["stationary_states"]) == 2
