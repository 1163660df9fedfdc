"""
Dense Hermitian linear algebra used throughout the package.

All routines are pure functions of their inputs. Eigenvalues are always
returned in non-increasing order.
"""

import threading
from typing import NamedTuple

import numpy as np

__all__ = ['EigenProfile', 'LinAlgValidationError', 'HERMITIAN_TOL',
           'PSD_CLAMP_REL', 'RANK_REL', 'PINV_REL', 'as_hermitian',
           'eig_hermitian', 'gevp', 'sqrt_psd', 'pinv', 'numeric_rank',
           'matrix_rank', 'psd_function', 'clamp_count']

HERMITIAN_TOL = 1e-12
PSD_CLAMP_REL = 1e-10
RANK_REL = 1e-9
PINV_REL = 1e-12

_clamp_lock = threading.Lock()
_clamp_counter = [0]


class LinAlgValidationError(ValueError):
    """Raised when an input violates a structural precondition."""


class EigenProfile(NamedTuple):
    """Eigenvalues sorted non-increasing and the matching basis columns."""
    values: np.ndarray
    basis: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.basis * self.values) @ self.basis.conj().T


def clamp_count() -> int:
    """Number of negative eigenvalues silently clamped so far."""
    with _clamp_lock:
        return _clamp_counter[0]


def _record_clamp(n):
    if n:
        with _clamp_lock:
            _clamp_counter[0] += int(n)


def as_hermitian(A, name='matrix') -> np.ndarray:
    """
    Validate that `A` is square and Hermitian and return its Hermitian part.

    The tolerance is absolute for matrices with entries of order one and
    scales with the largest entry beyond that.
    """
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise LinAlgValidationError(f'{name} must be square, got {A.shape}')
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if A.size and np.max(np.abs(A - A.conj().T)) > HERMITIAN_TOL * scale:
        raise LinAlgValidationError(f'{name} is not Hermitian')
    return 0.5 * (A + A.conj().T)


def _sorted_eigh(A):
    w, V = np.linalg.eigh(A)
    # eigh is ascending; a stable sort on -w keeps the column order inside
    # degenerate subspaces
    order = np.argsort(-w, kind='stable')
    return w[order], V[:, order]


def eig_hermitian(A) -> EigenProfile:
    """
    Full eigendecomposition of a Hermitian matrix.

    Parameters
    ----------
    A : array_like
        Hermitian matrix.

    Returns
    -------
    EigenProfile
        `values` non-increasing, `basis` unitary.
    """
    A = as_hermitian(A)
    w, V = _sorted_eigh(A)
    return EigenProfile(w, V)


def _clamped_eigs(A, name):
    w, V = _sorted_eigh(A)
    lam_max = max(float(w[0]), 0.0) if w.size else 0.0
    # an all-zero spectrum may carry roundoff of either sign
    floor = -PSD_CLAMP_REL * lam_max if lam_max > 0 else -1e-14
    if w.size and w[-1] < floor:
        raise LinAlgValidationError(
            f'{name} is not PSD (min eigenvalue {w[-1]:.3e})')
    neg = w < 0
    _record_clamp(np.count_nonzero(neg))
    w = np.where(neg, 0.0, w)
    return w, V


def psd_function(A, fun, name='matrix') -> np.ndarray:
    """Apply a scalar function to the clamped spectrum of a PSD matrix."""
    A = as_hermitian(A, name)
    w, V = _clamped_eigs(A, name)
    return (V * fun(w)) @ V.conj().T


def sqrt_psd(A) -> np.ndarray:
    """
    Hermitian PSD square root.

    Negative eigenvalues down to -1e-10 times the largest eigenvalue are
    clamped to zero, anything below that raises.
    """
    return psd_function(A, np.sqrt, 'sqrt_psd input')


def gevp(A, B) -> EigenProfile:
    """
    Generalized eigenproblem ``A v = w B v`` for PSD `A` and PD `B`.

    Solved as the standard problem for ``B^{-1/2} A B^{-1/2}``. The returned
    vectors are mapped back and are B-orthonormal.
    """
    A = as_hermitian(A, 'A')
    B = as_hermitian(B, 'B')
    if A.shape != B.shape:
        raise LinAlgValidationError('A and B must have the same shape')
    wb, Vb = _sorted_eigh(B)
    if wb.size and (wb[0] <= 0 or wb[-1] <= 1e-12 * wb[0]):
        raise LinAlgValidationError('B is not positive definite')
    B_isqrt = (Vb / np.sqrt(wb)) @ Vb.conj().T
    C = B_isqrt @ A @ B_isqrt
    w, U = _sorted_eigh(0.5 * (C + C.conj().T))
    return EigenProfile(w, B_isqrt @ U)


def pinv(A) -> np.ndarray:
    """Moore-Penrose pseudoinverse, singular values below 1e-12 of the max are dropped."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    if not A.size or not np.any(A):
        return np.zeros(A.shape[::-1], dtype=complex)
    return np.linalg.pinv(A, rcond=PINV_REL)


def numeric_rank(values) -> int:
    """Count entries above 1e-9 times the largest absolute entry."""
    v = np.abs(np.asarray(values, dtype=float))
    if not v.size or v.max() == 0:
        return 0
    return int(np.count_nonzero(v > RANK_REL * v.max()))


def matrix_rank(A) -> int:
    """`numeric_rank` of the singular values of `A`."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    if not A.size:
        return 0
    return numeric_rank(np.linalg.svd(A, compute_uv=False))
