import numpy as np
import pytest

from conftest import dm, ket
from qtraj import zoo
from qtraj.errors import DtTooLarge
from qtraj.lindblad import propagate
from qtraj.system import new_system
from qtraj.unravel import (default_dt, diffusive_increment, jump_no_click_drift, run_ensemble,
                           run_trajectory, step_diffusive, step_jump, time_average,
                           trajectory_seed)
from qtraj.zoo import SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Z

OMEGA, GAMMA = 1.0, 0.7
P0 = np.diag([1.0, 0.0]).astype(complex)


def test_dark_eigenstate_unchanged(qubit):
    rho = dm([1, 0])
    np.testing.assert_allclose(step_diffusive(qubit, rho, 1e-3, [0.0]), rho, atol=1e-15)


@pytest.mark.parametrize("dW", [-0.3, 0.0, 0.05, 1.2])
def test_dfs_state_has_no_measurement_update(qubit, dW):
    np.testing.assert_allclose(diffusive_increment(qubit, dm([1, 0]), 1e-3, [dW]), 0, atol=1e-15)
    np.testing.assert_allclose(diffusive_increment(qubit, dm([0, 1]), 1e-3, [dW]), 0, atol=1e-15)


def test_diffusive_increment_hand_expansion(qubit):
    # rho = |+><+|, H = w sz, L = sqrt(g) |1><1|, hand-expanded
    dt, dW, g = 1e-3, 0.1, np.sqrt(GAMMA)
    drift = np.array([[0, 1j * OMEGA - GAMMA / 4], [-1j * OMEGA - GAMMA / 4, 0]])
    noise = np.array([[-g / 2, 0], [0, g / 2]])
    expect = drift * dt + noise * dW
    got = diffusive_increment(qubit, dm(ket(1, 1)), dt, [dW])
    np.testing.assert_allclose(got, expect, atol=1e-12)


def test_no_click_drift_hand_expansion(qubit):
    expect = np.array([[GAMMA / 4, 1j * OMEGA], [-1j * OMEGA, -GAMMA / 4]])
    np.testing.assert_allclose(jump_no_click_drift(qubit, dm(ket(1, 1))), expect, atol=1e-12)


def test_dark_state_drift_is_unitary(two_qubit):
    _, q2 = zoo.two_qubit_dark_states()
    rho = dm(q2)
    H = two_qubit.hamiltonian
    np.testing.assert_allclose(jump_no_click_drift(two_qubit, rho), -1j * (H @ rho - rho @ H),
                               atol=1e-15)
    for u in np.linspace(0, 1, 5):
        _, ev = step_jump(two_qubit, rho, 1e-2, [u])
        assert ev == []


def test_forced_click():
    s = new_system(np.zeros((2, 2)), [SIGMA_MINUS])
    new, ev = step_jump(s, dm([0, 1]), 1e-2, [0.0])
    assert ev == [0]
    np.testing.assert_allclose(new, dm([1, 0]), atol=0)


def test_dt_too_large():
    s = new_system(np.zeros((2, 2)), [SIGMA_MINUS])
    with pytest.raises(DtTooLarge):
        step_jump(s, dm([0, 1]), 0.06, [0.5])


def test_default_dt_rule(qubit):
    rate = max(np.linalg.norm(qubit.hamiltonian, 2), GAMMA)
    assert default_dt(qubit) == pytest.approx(1e-3 / rate)


def test_trajectory_seeds_are_stable_and_distinct():
    assert trajectory_seed(7, 3) == trajectory_seed(7, 3)
    seeds = {trajectory_seed(7, i) for i in range(100)} | {trajectory_seed(8, 0)}
    assert len(seeds) == 101


@pytest.mark.parametrize("scheme", ["diffusive", "jump"])
def test_same_seed_bit_identical(qubit, scheme):
    a = run_trajectory(qubit, ket(1, 1), scheme, 2.0, dt=1e-3, seed=42, projectors=[P0])
    b = run_trajectory(qubit, ket(1, 1), scheme, 2.0, dt=1e-3, seed=42, projectors=[P0])
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(a.overlaps, b.overlaps)
    assert a.jump_events == b.jump_events


def test_thread_count_does_not_change_results(qubit):
    kw = dict(dt=1e-3, base_seed=5, projectors=[P0], chunk=3)
    a = run_ensemble(qubit, ket(1, 1), "diffusive", 10, 1.0, threads=1, **kw)
    b = run_ensemble(qubit, ket(1, 1), "diffusive", 10, 1.0, threads=3, **kw)
    np.testing.assert_array_equal(a.overlap_series, b.overlap_series)
    np.testing.assert_array_equal(a.mean_state_series, b.mean_state_series)


def test_single_trajectory_ensemble_equals_record(qubit):
    ens = run_ensemble(qubit, ket(1, 1), "jump", 1, 3.0, dt=1e-3, base_seed=9)
    rec = run_trajectory(qubit, ket(1, 1), "jump", 3.0, dt=1e-3, seed=trajectory_seed(9, 0))
    np.testing.assert_allclose(ens.mean_state_series, rec.states, atol=1e-14)


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_qubit_diffusive_terminal_overlap_is_binary(qubit, seed):
    rec = run_trajectory(qubit, ket(1, 1), "diffusive", 40.0, dt=1e-3, seed=seed,
                         projectors=[P0], keep_states=False)
    p = rec.overlaps[0, -1]
    assert min(p, 1 - p) < 1e-3


def test_states_stay_physical(two_qubit):
    for scheme in ("diffusive", "jump"):
        rec = run_trajectory(two_qubit, zoo.two_qubit_initial_state(), scheme, 5.0, dt=1e-3,
                             seed=3, stride=20)
        for rho in rec.states:
            assert abs(np.trace(rho) - 1) < 1e-10
            assert np.linalg.norm(rho - rho.conj().T) < 1e-12
            assert np.linalg.eigvalsh(rho).min() > -1e-10


def test_classical_noise_gives_no_localization():
    s = zoo.classical_noise_system(0.5 * SIGMA_Z, [SIGMA_Z], [0.3])
    rec = run_trajectory(s, ket(1, 1), "diffusive", 20.0, dt=1e-3, seed=11, projectors=[P0],
                         stride=50, keep_states=False)
    assert np.abs(rec.overlaps[0] - 0.5).max() < 5e-3


def test_ensemble_mean_tracks_lindblad(qubit):
    n = 200
    ens = run_ensemble(qubit, ket(1, 1), "diffusive", n, 5.0, dt=1e-3, base_seed=2, stride=250)
    rho0 = dm(ket(1, 1))
    err = max(np.linalg.norm(m - propagate(qubit, rho0, t))
              for m, t in zip(ens.mean_state_series, ens.times))
    assert err <= 5 / np.sqrt(n)


def test_time_average_cases(qubit):
    rec = run_trajectory(qubit, ket(1, 0), "diffusive", 1.0, dt=1e-3, seed=0)
    np.testing.assert_allclose(time_average(rec), dm([1, 0]), atol=1e-12)
    rec = run_trajectory(qubit, ket(1, 1), "diffusive", 40.0, dt=1e-3, seed=4, stride=100)
    avg = time_average(rec, t_burn=20.0)
    assert min(np.linalg.norm(avg - dm([1, 0])), np.linalg.norm(avg - dm([0, 1]))) < 1e-2


def test_unique_steady_state_is_ergodic():
    s = new_system(SIGMA_X, [np.sqrt(0.5) * SIGMA_Z])
    ens = run_ensemble(s, ket(1, 0), "diffusive", 4, 1000.0, dt=2e-3, base_seed=1, stride=50,
                       t_burn=10.0, keep_mean=False)
    for avg in ens.mean_fidelity_inputs:
        assert np.linalg.norm(avg - np.eye(2) / 2) < 2e-2


def test_jump_counts_match_events(qubit):
    s = new_system(0.3 * SIGMA_X, [np.sqrt(0.5) * SIGMA_PLUS @ SIGMA_MINUS])
    rec = run_trajectory(s, ket(1, 0), "jump", 20.0, dt=1e-3, seed=8)
    assert len(rec.jump_events) > 0
    assert all(k == 0 for _, k in rec.jump_events)


def test_unitary_jump_rate_is_constant():
    s = new_system(0.7 * SIGMA_Z, [0.5 * SIGMA_X])
    rec = run_trajectory(s, ket(1, 2), "jump", 20.0, dt=1e-3, seed=6, stride=50)
    LdL = s.jumps[0].conj().T @ s.jumps[0]
    rates = [np.trace(LdL @ r).real for r in rec.states]
    assert np.ptp(rates) < 1e-10
    assert len(rec.jump_events) > 0
