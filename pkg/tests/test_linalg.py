import numpy as np
import pytest

from qtraj.errors import NonHermitianInput
from qtraj.linalg import (commutator_gram, commutator_superop, expm, hermitian_eig, kron,
                          null_space, orthonormalize, psd_project, support, unvectorize,
                          vectorize)
from qtraj.zoo import SIGMA_X, SIGMA_Z


def test_vec_identity_column_stacking():
    np.testing.assert_array_equal(vectorize(np.eye(2)), [1, 0, 0, 1])
    M = np.array([[1, 2], [3, 4]])
    np.testing.assert_array_equal(vectorize(M), [1, 3, 2, 4])


def test_vec_round_trip(rng):
    M = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    np.testing.assert_array_equal(unvectorize(vectorize(M), 3), M)


def test_vec_sandwich_identity(rng):
    for _ in range(5):
        A, X, B = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
                   for _ in range(3))
        lhs = vectorize(A @ X @ B)
        rhs = np.kron(B.T, A) @ vectorize(X)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_kron_basics(rng):
    np.testing.assert_array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))
    np.testing.assert_array_equal(kron(SIGMA_X, SIGMA_X), np.fliplr(np.eye(4)))
    A, B, C, D = (rng.standard_normal((2, 2)) for _ in range(4))
    np.testing.assert_allclose(kron(A, B) @ kron(C, D), kron(A @ C, B @ D), atol=1e-12)


def test_hermitian_eig_paulis():
    w, _ = hermitian_eig(SIGMA_Z)
    np.testing.assert_allclose(w, [-1, 1])
    w, v = hermitian_eig(SIGMA_X)
    np.testing.assert_allclose(w, [-1, 1])
    minus = np.array([1, -1]) / np.sqrt(2)
    plus = np.array([1, 1]) / np.sqrt(2)
    assert abs(abs(np.vdot(minus, v[:, 0])) - 1) < 1e-12
    assert abs(abs(np.vdot(plus, v[:, 1])) - 1) < 1e-12


def test_hermitian_eig_reconstruction(rng):
    A = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    H = A + A.conj().T
    w, v = hermitian_eig(H)
    assert np.linalg.norm(v @ np.diag(w) @ v.conj().T - H) < 1e-10


def test_hermitian_eig_rejects_non_hermitian():
    with pytest.raises(NonHermitianInput):
        hermitian_eig(np.array([[0, 1], [0, 0]]))


def test_expm_cases(rng):
    np.testing.assert_allclose(expm(np.zeros((3, 3))), np.eye(3))
    # Euler: exp(i theta n.sigma) = cos theta + i sin theta n.sigma
    np.testing.assert_allclose(expm(1j * np.pi / 2 * SIGMA_X), 1j * SIGMA_X, atol=1e-9)
    A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    np.testing.assert_allclose(expm(A) @ expm(-A), np.eye(4), atol=1e-8)


def test_commutator_superop_and_gram(rng):
    A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    X = rng.standard_normal((3, 3))
    C = commutator_superop(A)
    np.testing.assert_allclose(unvectorize(C @ vectorize(X), 3), A @ X - X @ A, atol=1e-12)
    np.testing.assert_allclose(commutator_gram(A), C.conj().T @ C, atol=1e-12)


def test_psd_project_and_support():
    rho = np.diag([0.7, 0.3 + 1e-9, -1e-9])
    P = psd_project(rho)
    assert np.linalg.eigvalsh(P).min() >= 0
    assert support(np.diag([0.5, 0.5, 0.0])).shape == (3, 2)


def test_null_space_and_orthonormalize():
    A = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
    N = null_space(A)
    assert N.shape == (3, 2)
    np.testing.assert_allclose(A @ N, 0, atol=1e-12)
    V = orthonormalize(np.array([[1.0, 2.0], [0.0, 0.0], [0.0, 0.0]]))
    assert V.shape == (3, 1)
