"""
Channel statistics and the pilot-assisted estimation pipeline.

The channel is ``H = W R^{1/2}`` with white ``W`` and transmit covariance
``R``. Training with a pilot matrix whose Gram is ``P`` yields the MMSE
estimate, whose covariance ``R_hat`` and error covariance ``R_tilde`` add up
to ``R``. The effective SNR folds the estimation error into the noise.

Matrix-domain functions accept either plain arrays or the small wrapper
types defined here. Vector-domain functions work on eigenvalue vectors of
matrices that share the eigenbasis of ``R``.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .hermitian_kernels import (EigenProfile, LinAlgValidationError,
                                as_hermitian, eig_hermitian, numeric_rank,
                                psd_function, RANK_REL)

__all__ = ['ChannelCovariance', 'GramMatrix', 'EstimationCovariances',
           'EffectiveSnr', 'AllocationPair', 'SystemConfig',
           'ConfigError', 'estimator_matrix', 'estimation_covariances',
           'r_hat_direct', 'r_hat_inversion_lemma', 'effective_snr',
           'effective_snr_congruent', 'snr_profile_vec', 'r_hat_vec', 'r_tilde_vec', 'gram_factor',
           'derive_seed', 'sample_whitened', 'sample_whitened_batch',
           'frozen_samples']


class ConfigError(ValueError):
    """Raised for inconsistent system or budget parameters."""


def _matrix(X) -> np.ndarray:
    if isinstance(X, (GramMatrix, ChannelCovariance)):
        return X.matrix
    return as_hermitian(X)


@dataclass(frozen=True)
class ChannelCovariance:
    """Full-rank transmit-side channel covariance with cached eigenpairs."""
    R: np.ndarray
    eigen: EigenProfile = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        R = as_hermitian(self.R, 'R')
        eig = eig_hermitian(R)
        if eig.values[-1] <= 0:
            raise LinAlgValidationError('channel covariance must be full rank')
        object.__setattr__(self, 'R', R)
        object.__setattr__(self, 'eigen', eig)

    @classmethod
    def from_eigs(cls, r, basis=None):
        r = np.asarray(r, dtype=float)
        if basis is None:
            return cls(np.diag(r).astype(complex))
        basis = np.asarray(basis, dtype=complex)
        return cls((basis * r) @ basis.conj().T)

    @property
    def matrix(self):
        return self.R

    @property
    def eigs(self):
        return self.eigen.values

    @property
    def dim(self):
        return self.R.shape[0]


@dataclass(frozen=True)
class GramMatrix:
    """PSD Gram matrix with a role ('pilot' or 'transmit') and a trace budget."""
    M: np.ndarray
    role: str = 'transmit'
    trace_budget: float = np.inf

    def __post_init__(self):
        if self.role not in ('pilot', 'transmit'):
            raise ValueError(f'unknown role {self.role!r}')
        M = psd_function(self.M, lambda w: w, f'{self.role} Gram')
        if np.trace(M).real > self.trace_budget + 1e-9:
            raise ConfigError(
                f'{self.role} Gram trace {np.trace(M).real:.6g} exceeds '
                f'budget {self.trace_budget:.6g}')
        object.__setattr__(self, 'M', M)

    @property
    def matrix(self):
        return self.M


@dataclass(frozen=True)
class EstimationCovariances:
    r_hat: np.ndarray
    r_tilde: np.ndarray


@dataclass(frozen=True)
class EffectiveSnr:
    S: np.ndarray
    profile: np.ndarray
    denom: float
    P: Optional[np.ndarray] = None
    Q: Optional[np.ndarray] = None


def effective_snr_congruent(P, Q, R) -> np.ndarray:
    """
    ``Q^{1/2} R_hat Q^{1/2} / (1 + tr(Q R_tilde))``.

    Unitarily similar to the matrix returned by `effective_snr` (same
    spectrum), but a congruence of ``R_hat``, so it is Loewner monotone in
    the pilot Gram where the ``R_hat^{1/2} Q R_hat^{1/2}`` form is not.
    """
    Pm, Qm, Rm = _matrix(P), _matrix(Q), _matrix(R)
    cov = estimation_covariances(Pm, Rm)
    denom = 1.0 + float(np.trace(Qm @ cov.r_tilde).real)
    Qh = psd_function(Qm, np.sqrt)
    S = Qh @ cov.r_hat @ Qh / denom
    return 0.5 * (S + S.conj().T)


@dataclass(frozen=True)
class AllocationPair:
    """Pilot and transmit eigenvalues in the eigenbasis of ``R``."""
    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if p.shape != q.shape or p.ndim != 1:
            raise ValueError('p and q must be vectors of equal length')
        if np.any(p < 0) or np.any(q < 0):
            raise ValueError('allocations must be non-negative')
        object.__setattr__(self, 'p', p)
        object.__setattr__(self, 'q', q)

    @property
    def n_tx(self):
        return self.p.size


@dataclass(frozen=True)
class SystemConfig:
    """
    Block-fading MIMO system parameters.

    Parameters
    ----------
    n_tx, n_rx : int
        Antenna counts.
    coherence_time : int
        Block length ``T`` in channel uses.
    training_duration : int
        Pilot length ``T_tau`` with ``1 <= T_tau <= min(T-1, n_tx)``.
    power : float
        Average power ``mu`` per channel use.
    channel_eigs : sequence of float
        Eigenvalues of ``R``, positive and non-increasing.
    """
    n_tx: int
    n_rx: int
    coherence_time: int
    training_duration: int
    power: float
    channel_eigs: Sequence[float]

    def __post_init__(self):
        r = np.asarray(self.channel_eigs, dtype=float).ravel()
        object.__setattr__(self, 'channel_eigs', r)
        if int(self.n_tx) != self.n_tx or self.n_tx < 1:
            raise ConfigError('n_tx must be a positive integer')
        if int(self.n_rx) != self.n_rx or self.n_rx < 1:
            raise ConfigError('n_rx must be a positive integer')
        if int(self.coherence_time) != self.coherence_time \
                or self.coherence_time < 2:
            raise ConfigError('coherence_time must be an integer > 1')
        tt = self.training_duration
        if int(tt) != tt or not 1 <= tt <= min(self.coherence_time - 1,
                                                self.n_tx):
            raise ConfigError(
                'training_duration must satisfy 1 <= T_tau <= min(T-1, n_tx)')
        if not np.isfinite(self.power) or self.power <= 0:
            raise ConfigError('power must be positive')
        if r.size != self.n_tx:
            raise ConfigError('channel_eigs must have n_tx entries')
        if np.any(r <= 0) or not np.all(np.isfinite(r)):
            raise ConfigError('channel_eigs must be positive')
        if np.any(np.diff(r) > 0):
            raise ConfigError('channel_eigs must be non-increasing')

    @property
    def r(self) -> np.ndarray:
        return self.channel_eigs

    @property
    def total_energy(self) -> float:
        return self.coherence_time * self.power

    @property
    def data_slots(self) -> int:
        return self.coherence_time - self.training_duration

    def with_training(self, training_duration):
        return SystemConfig(self.n_tx, self.n_rx, self.coherence_time,
                            training_duration, self.power, self.channel_eigs)

    def with_power(self, power):
        return SystemConfig(self.n_tx, self.n_rx, self.coherence_time,
                            self.training_duration, power, self.channel_eigs)


def estimator_matrix(T_pilot, R) -> np.ndarray:
    """
    MMSE estimator ``G = (T^H R T + I)^{-1} T^H R``.

    `T_pilot` is ``N_T x T_tau``. The estimate is ``H_hat = Y_tau G``.
    """
    R = _matrix(R)
    T = np.atleast_2d(np.asarray(T_pilot, dtype=complex))
    if T.shape[0] != R.shape[0]:
        raise ValueError('pilot matrix must have N_T rows')
    TH = T.conj().T
    A = TH @ R @ T + np.eye(T.shape[1])
    return np.linalg.solve(A, TH @ R)


def r_hat_direct(P, R) -> np.ndarray:
    """``R - (R^{-1} + P)^{-1}``."""
    R = _matrix(R)
    P = _matrix(P)
    R_tilde = _r_tilde(P, R)
    return 0.5 * ((R - R_tilde) + (R - R_tilde).conj().T)


def r_hat_inversion_lemma(P, R) -> np.ndarray:
    """
    ``R U_P (L_P^{-1} + U_P^H R U_P)^{-1} U_P^H R`` on the range of ``P``.

    Exactly zero outside the range of ``R P``, so it keeps the rank of ``P``.
    """
    R = _matrix(R)
    P = _matrix(P)
    eig = eig_hermitian(P)
    k = numeric_rank(eig.values)
    if k == 0:
        return np.zeros_like(R)
    U = eig.basis[:, :k]
    lam = eig.values[:k]
    core = np.diag(1.0 / lam) + U.conj().T @ R @ U
    RU = R @ U
    X = RU @ np.linalg.solve(core, RU.conj().T)
    return 0.5 * (X + X.conj().T)


def _r_tilde(P, R):
    # (R^{-1} + P)^{-1} = R^{1/2}(I + R^{1/2} P R^{1/2})^{-1} R^{1/2}
    Rh = psd_function(R, np.sqrt)
    M = np.eye(R.shape[0]) + Rh @ P @ Rh
    X = Rh @ np.linalg.solve(M, Rh)
    return 0.5 * (X + X.conj().T)


def estimation_covariances(P, R) -> EstimationCovariances:
    """
    Covariances of the MMSE estimate and of its error.

    The error covariance is ``(R^{-1} + P)^{-1}``. For rank-deficient `P` the
    estimate covariance uses the inversion-lemma form so that its rank equals
    the rank of `P` exactly.
    """
    R = _matrix(R)
    P = _matrix(P)
    R_tilde = _r_tilde(P, R)
    if numeric_rank(np.linalg.eigvalsh(P)) < R.shape[0]:
        R_hat = r_hat_inversion_lemma(P, R)
    else:
        R_hat = 0.5 * ((R - R_tilde) + (R - R_tilde).conj().T)
    return EstimationCovariances(R_hat, R_tilde)


def _profile(S):
    w = np.linalg.eigvalsh(S)[::-1]
    return np.where(w < 0, 0.0, w)


def effective_snr(P, Q, R) -> EffectiveSnr:
    """
    Matrix effective SNR ``R_hat^{1/2} Q R_hat^{1/2} / (1 + tr(Q R_tilde))``.
    """
    Pm, Qm, Rm = _matrix(P), _matrix(Q), _matrix(R)
    cov = estimation_covariances(Pm, Rm)
    denom = 1.0 + float(np.trace(Qm @ cov.r_tilde).real)
    Rh = psd_function(cov.r_hat, np.sqrt)
    S = Rh @ Qm @ Rh / denom
    S = 0.5 * (S + S.conj().T)
    return EffectiveSnr(S, _profile(S), denom, Pm, Qm)


def r_tilde_vec(p, r) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    return r / (1.0 + r * p)


def r_hat_vec(p, r) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    return r * r * p / (1.0 + r * p)


def snr_profile_vec(p, q, r) -> np.ndarray:
    """
    Effective SNR eigenvalues for pilots and precoder aligned with ``R``.

    Entry ``i`` belongs to eigenmode ``i`` of ``R``; the result is not sorted.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    if not (p.shape == q.shape == r.shape):
        raise ValueError('p, q and r must have equal shapes')
    if np.any(p < 0) or np.any(q < 0) or np.any(r < 0):
        raise ValueError('p, q and r must be non-negative')
    return r_hat_vec(p, r) * q / (1.0 + q @ r_tilde_vec(p, r))


def gram_factor(M) -> np.ndarray:
    """
    Factor ``F`` with ``F F^H = M`` and as many columns as the rank of `M`.
    """
    eig = eig_hermitian(_matrix(M))
    w = np.where(eig.values < 0, 0.0, eig.values)
    k = numeric_rank(w)
    return eig.basis[:, :k] * np.sqrt(w[:k])


# counter-based sampling --------------------------------------------------

_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(x):
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over='ignore'):
        x = x + _GOLDEN
        x = (x ^ (x >> np.uint64(30))) * _M1
        x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def _combine(a, b):
    return _mix(np.asarray(a, dtype=np.uint64) ^ _mix(b))


def derive_seed(seed: int, n) -> np.ndarray:
    """Seed for stream `n` of master `seed` (vectorized over `n`)."""
    s = np.uint64(int(seed) & _MASK)
    return _combine(s, np.asarray(n, dtype=np.uint64))


def _gaussians(seeds, n_rx, n_cols):
    seeds = np.asarray(seeds, dtype=np.uint64)[..., None, None]
    i = np.arange(n_rx, dtype=np.uint64)[:, None]
    j = np.arange(n_cols, dtype=np.uint64)[None, :]
    h = _combine(_combine(seeds, i), j)
    u1 = ((_combine(h, np.uint64(0)) >> np.uint64(11)).astype(float) + 1.0) \
        * 2.0 ** -53
    u2 = (_combine(h, np.uint64(1)) >> np.uint64(11)).astype(float) \
        * 2.0 ** -53
    # Box-Muller with unit total variance
    return np.sqrt(-np.log(u1)) * np.exp(2j * np.pi * u2)


def sample_whitened(n_rx: int, n_cols: int, seed: int) -> np.ndarray:
    """
    ``n_rx x n_cols`` matrix of unit-variance circular complex Gaussians.

    Entry ``(i, j)`` is a function of ``(seed, i, j)`` only.
    """
    if n_rx < 1 or n_cols < 1:
        raise ValueError('dimensions must be positive')
    return _gaussians(np.uint64(int(seed) & _MASK), n_rx, n_cols)


def sample_whitened_batch(n_rx, n_cols, seed, n_samples) -> np.ndarray:
    """Stack of ``sample_whitened(n_rx, n_cols, derive_seed(seed, n))``."""
    seeds = derive_seed(seed, np.arange(n_samples, dtype=np.uint64))
    return _gaussians(seeds, n_rx, n_cols)


@lru_cache(maxsize=16)
def frozen_samples(n_rx: int, n_cols: int, seed: int, n_samples: int):
    """
    Cached read-only samples ``W`` and Gram matrices ``W^H W``.

    Returns a pair of arrays of shapes ``(N, n_rx, n_cols)`` and
    ``(N, n_cols, n_cols)``.
    """
    W = sample_whitened_batch(n_rx, n_cols, seed, n_samples)
    G = np.einsum('nki,nkj->nij', W.conj(), W)
    W.flags.writeable = False
    G.flags.writeable = False
    return W, G
