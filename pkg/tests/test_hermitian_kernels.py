import numpy as np
import pytest
from hypothesis import given, strategies as st

from trainprecode import hermitian_kernels as hk
from conftest import random_hermitian, random_psd


def test_eig_identity():
    prof = hk.eig_hermitian(np.eye(2))
    assert np.allclose(prof.values, [1, 1])
    assert np.allclose(prof.basis.conj().T @ prof.basis, np.eye(2))


def test_eig_diagonal_reorders():
    prof = hk.eig_hermitian(np.diag([1.0, 3.0]))
    assert np.allclose(prof.values, [3, 1])
    assert np.allclose(np.abs(prof.basis[:, 0]), [0, 1])


def test_eig_rejects_non_hermitian():
    with pytest.raises(hk.LinAlgValidationError):
        hk.eig_hermitian(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_hermitian_tolerance_is_absolute_scale():
    A = np.diag([1.0, 2.0]).astype(complex)
    A[0, 1] = 1e-14
    hk.eig_hermitian(A)


@given(st.integers(1, 6), st.integers(0, 10**6), st.booleans())
def test_eig_reconstruction(n, seed, psd):
    rng = np.random.default_rng(seed)
    A = random_psd(rng, n) if psd else random_hermitian(rng, n)
    prof = hk.eig_hermitian(A)
    assert np.all(np.diff(prof.values) <= 0)
    assert np.linalg.norm(prof.basis.conj().T @ prof.basis - np.eye(n)) <= 1e-10
    res = np.linalg.norm(prof.reconstruct() - A) / max(np.linalg.norm(A), 1e-300)
    assert res <= 1e-9


def test_gevp_examples():
    assert np.allclose(hk.gevp(np.eye(3) * 2, np.eye(3) * 2).values, 1)
    assert np.allclose(hk.gevp(np.diag([2.0, 0.0]), np.eye(2)).values, [2, 0])
    # hand evaluation of the diagonal ratios 1/2 and 1/4
    assert np.allclose(hk.gevp(np.eye(2), np.diag([2.0, 4.0])).values,
                       [0.5, 0.25])


def test_gevp_rejects_singular_b():
    with pytest.raises(hk.LinAlgValidationError):
        hk.gevp(np.eye(2), np.diag([1.0, 0.0]))


@given(st.integers(1, 5), st.integers(0, 10**6))
def test_gevp_consistency(n, seed):
    rng = np.random.default_rng(seed)
    A = random_psd(rng, n, rank=rng.integers(1, n + 1))
    B = random_psd(rng, n) + 0.1 * np.eye(n)
    prof = hk.gevp(A, B)
    assert np.all(np.diff(prof.values) <= 1e-12)
    for w, v in zip(prof.values, prof.basis.T):
        res = np.linalg.norm(A @ v - w * B @ v)
        assert res <= 1e-8 * (np.linalg.norm(A) + abs(w) * np.linalg.norm(B))
    # B-orthonormal eigenvectors
    V = prof.basis
    assert np.allclose(V.conj().T @ B @ V, np.eye(n), atol=1e-9)


def test_sqrt_examples():
    assert np.allclose(hk.sqrt_psd(np.eye(3)), np.eye(3))
    assert np.allclose(hk.sqrt_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))


def test_sqrt_clamps_tiny_negative_and_counts():
    before = hk.clamp_count()
    A = np.diag([1.0, -1e-12])
    root = hk.sqrt_psd(A)
    assert np.allclose(root, np.diag([1.0, 0.0]))
    assert hk.clamp_count() > before


def test_sqrt_rejects_negative():
    with pytest.raises(hk.LinAlgValidationError):
        hk.sqrt_psd(np.diag([1.0, -1e-3]))


@given(st.integers(1, 6), st.integers(0, 10**6))
def test_sqrt_squares_back(n, seed):
    rng = np.random.default_rng(seed)
    A = random_psd(rng, n, rank=rng.integers(1, n + 1))
    root = hk.sqrt_psd(A)
    assert np.allclose(root, root.conj().T)
    assert np.linalg.norm(root @ root - A) <= 1e-9 * np.linalg.norm(A)


def test_pinv_examples():
    assert np.allclose(hk.pinv(np.eye(2)), np.eye(2))
    Z = hk.pinv(np.zeros((2, 3)))
    assert Z.shape == (3, 2) and not np.any(Z)
    assert np.allclose(hk.pinv(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))


def _penrose_residuals(A, X):
    nA = max(np.linalg.norm(A), 1e-300)
    nX = max(np.linalg.norm(X), 1e-300)
    return (np.linalg.norm(A @ X @ A - A) / nA,
            np.linalg.norm(X @ A @ X - X) / nX,
            np.linalg.norm((A @ X).conj().T - A @ X) / max(np.linalg.norm(A @ X), 1e-300),
            np.linalg.norm((X @ A).conj().T - X @ A) / max(np.linalg.norm(X @ A), 1e-300))


def test_penrose_identities_200_random():
    rng = np.random.default_rng(7)
    for _ in range(200):
        m, n = rng.integers(1, 7, size=2)
        k = rng.integers(1, min(m, n) + 1)
        A = (rng.normal(size=(m, k)) + 1j * rng.normal(size=(m, k))) @ \
            (rng.normal(size=(k, n)) + 1j * rng.normal(size=(k, n)))
        assert max(_penrose_residuals(A, hk.pinv(A))) <= 1e-9


def test_numeric_rank_threshold():
    assert hk.numeric_rank([1.0, 1e-8, 1e-10]) == 2
    assert hk.numeric_rank([0.0, 0.0]) == 0
    assert hk.matrix_rank(np.diag([3.0, 0.0, 1e-12])) == 1
