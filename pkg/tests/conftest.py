import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    'repo', deadline=None, derandomize=True, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile('repo')

REF_EIGS = [2.0 / 3.0, 1.0 / 3.0]


def random_psd(rng, n, rank=None, scale=1.0):
    """Complex PSD matrix of the given rank with unit-order entries."""
    rank = n if rank is None else rank
    X = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    return scale * (X @ X.conj().T) / max(rank, 1)


def random_hermitian(rng, n):
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (X + X.conj().T)


def random_unitary(rng, n):
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    Q, Rr = np.linalg.qr(X)
    return Q * (np.diag(Rr) / np.abs(np.diag(Rr)))


def with_trace(M, t):
    return M * (t / np.trace(M).real)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
