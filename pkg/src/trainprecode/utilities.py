"""
Utilities of the effective-SNR eigenvalues and their gradients.

Monte Carlo kinds average over a frozen set of whitened channel draws that
is fully determined by ``(n_rx, len(s), master_seed, mc_samples)``. Value and
gradient use the same draws, so for a fixed spec every utility is a smooth
deterministic function of ``s``.

All values are in nats. Every kind is oriented so that larger is better.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .channel_model import frozen_samples

__all__ = ['KINDS', 'MC_KINDS', 'UtilitySpec', 'UtilityValue',
           'NonDifferentiableError', 'Objective', 'evaluate', 'gradient']

MC_KINDS = ('mutual_info', 'mmse_bound', 'expected_det', 'minkowski_lower',
            'expected_logdet', 'trace_posterior')
KINDS = MC_KINDS + ('trace', 'det', 'logdet_shifted', 'harmonic',
                    'jensen_upper_1', 'jensen_upper_2')
# kinds whose superlevel sets are convex but which are not concave
QUASI_CONCAVE = ('det', 'harmonic', 'expected_det')


class NonDifferentiableError(ValueError):
    """Gradient requested at a point where the utility is not differentiable."""


@dataclass(frozen=True)
class UtilitySpec:
    """
    Which utility to evaluate and how.

    Parameters
    ----------
    kind : str
        One of `KINDS`.
    n_rx : int
        Number of receive antennas.
    streams : int, optional
        Stream count ``r`` of the MMSE bound.
    mc_samples : int
        Number of frozen channel draws for Monte Carlo kinds.
    master_seed : int
        Seed of the draws.
    shift : float
        Weight ``nu`` of ``log det(I + nu S)``.
    """
    kind: str = 'mutual_info'
    n_rx: int = 1
    streams: Optional[int] = None
    mc_samples: int = 10_000
    master_seed: int = 0
    shift: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f'unknown utility kind {self.kind!r}')
        if int(self.n_rx) != self.n_rx or self.n_rx < 1:
            raise ValueError('n_rx must be a positive integer')
        if int(self.mc_samples) != self.mc_samples or self.mc_samples < 2:
            raise ValueError('mc_samples must be an integer >= 2')
        if self.kind == 'mmse_bound':
            if self.streams is None or int(self.streams) != self.streams \
                    or self.streams < 1:
                raise ValueError('mmse_bound needs a positive stream count')
        if self.shift < 0:
            raise ValueError('shift must be non-negative')

    @property
    def is_monte_carlo(self):
        return self.kind in MC_KINDS

    @property
    def is_concave(self):
        return self.kind not in QUASI_CONCAVE

    def replace(self, **kw):
        d = dict(kind=self.kind, n_rx=self.n_rx, streams=self.streams,
                 mc_samples=self.mc_samples, master_seed=self.master_seed,
                 shift=self.shift)
        d.update(kw)
        return UtilitySpec(**d)


@dataclass(frozen=True)
class UtilityValue:
    value: float
    std_error: float = 0.0
    singular: bool = False


def _check_profile(s):
    s = np.asarray(s, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise ValueError('profile must be a non-empty vector')
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise ValueError('profile entries must be finite and non-negative')
    return s


@lru_cache(maxsize=16)
def _gram_entries(n_rx, n, seed, N):
    """Per-draw Gram entries used by the two-column fast path."""
    _, G = frozen_samples(n_rx, n, seed, N)
    g11 = G[:, 0, 0].real.copy()
    g22 = G[:, 1, 1].real.copy()
    det = g11 * g22 - np.abs(G[:, 0, 1]) ** 2
    return g11, g22, np.maximum(det, 0.0)


def _draws(spec, n):
    return frozen_samples(spec.n_rx, n, int(spec.master_seed),
                          int(spec.mc_samples))


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    return float(np.mean(x)), float(np.std(x, ddof=1) / np.sqrt(x.size))


def _logdet_terms(spec, s):
    """Per-draw ``log det(I + S G)`` and, optionally, its derivatives."""
    n = s.size
    if n == 1:
        _, G = _draws(spec, 1)
        g = G[:, 0, 0].real
        d = 1.0 + s[0] * g
        return np.log(d), (g / d)[:, None]
    if n == 2:
        g11, g22, dg = _gram_entries(spec.n_rx, 2, int(spec.master_seed),
                                     int(spec.mc_samples))
        d = 1.0 + s[0] * g11 + s[1] * g22 + s[0] * s[1] * dg
        grad = np.stack([(g11 + s[1] * dg) / d, (g22 + s[0] * dg) / d], 1)
        return np.log(d), grad
    _, G = _draws(spec, n)
    A = np.eye(n) + G * s[None, None, :]
    # (I + G S)^{-1} G is Hermitian, its diagonal is the gradient
    M = np.linalg.solve(A, G)
    sign, ld = np.linalg.slogdet(A)
    return ld, np.real(np.diagonal(M, axis1=1, axis2=2))


def _trace_inv_terms(spec, s):
    """Per-draw ``tr (I + S G)^{-1}`` and its derivatives."""
    n = s.size
    if n == 1:
        _, G = _draws(spec, 1)
        g = G[:, 0, 0].real
        d = 1.0 + s[0] * g
        return 1.0 / d, (-g / d ** 2)[:, None]
    if n == 2:
        g11, g22, dg = _gram_entries(spec.n_rx, 2, int(spec.master_seed),
                                     int(spec.mc_samples))
        d = 1.0 + s[0] * g11 + s[1] * g22 + s[0] * s[1] * dg
        t = 2.0 + s[0] * g11 + s[1] * g22
        d1 = g11 + s[1] * dg
        d2 = g22 + s[0] * dg
        grad = np.stack([(g11 * d - t * d1) / d ** 2,
                         (g22 * d - t * d2) / d ** 2], 1)
        return t / d, grad
    _, G = _draws(spec, n)
    A = np.eye(n) + G * s[None, None, :]
    K = np.linalg.inv(A)
    tr = np.real(np.trace(K, axis1=1, axis2=2))
    # d tr(I+SG)^{-1} / ds_i = -[G (I+SG)^{-2}]_ii with (I+SG)^{-1} = K^H
    KH = np.conj(np.swapaxes(K, 1, 2))
    grad = -np.real(np.diagonal(G @ KH @ KH, axis1=1, axis2=2))
    return tr, grad


def _mc_value(spec, s):
    kind = spec.kind
    n = s.size
    if kind == 'mutual_info':
        x, _ = _logdet_terms(spec, s)
        m, se = _mean_se(x)
        return UtilityValue(m, se)
    if kind == 'mmse_bound':
        x, _ = _trace_inv_terms(spec, s)
        m, se = _mean_se(x)
        return UtilityValue(-(spec.streams - n + m), se)
    if kind == 'expected_det':
        x, _ = _logdet_terms(spec, s)
        m, se = _mean_se(np.exp(x))
        return UtilityValue(m, se)
    if kind == 'trace_posterior':
        if np.any(s == 0):
            return UtilityValue(-np.inf, 0.0, True)
        x, _ = _posterior_terms(spec, s)
        m, se = _mean_se(x)
        return UtilityValue(m, se)
    if kind in ('expected_logdet', 'minkowski_lower'):
        x, ok = _lower_logdet_terms(spec, s)
        if not ok:
            if kind == 'minkowski_lower':
                # the bound tends to zero as the determinant vanishes
                return UtilityValue(0.0, 0.0, True)
            return UtilityValue(-np.inf, 0.0, True)
        m, se = _mean_se(x)
        if kind == 'expected_logdet':
            return UtilityValue(m, se)
        k = min(n, spec.n_rx)
        z = m / k
        val = k * np.logaddexp(0.0, z)
        slope = 1.0 / (1.0 + np.exp(-z))
        return UtilityValue(float(val), float(slope * se))
    raise AssertionError(kind)


def _posterior_terms(spec, s):
    """Per-draw ``tr (S^{-1} + G)^{-1}`` and its derivatives."""
    n = s.size
    _, G = _draws(spec, n)
    A = np.eye(n) + G * s[None, None, :]
    K = np.linalg.inv(A)
    # (S^{-1} + G)^{-1} = S (I + G S)^{-1}
    val = np.real(np.einsum('i,nii->n', s, K))
    grad = np.sum(np.abs(K) ** 2, axis=2)
    return val, grad


def _lower_logdet_terms(spec, s):
    """
    Per-draw ``log det(W S W^H)`` (``n >= n_rx``) or
    ``log det(S) + log det(W^H W)`` (``n < n_rx``). Second value is False
    when the argument is singular for every draw.
    """
    n = s.size
    if n >= spec.n_rx:
        if np.count_nonzero(s) < spec.n_rx:
            return None, False
        W, G = _draws(spec, n)
        if n == spec.n_rx:
            # square W: det(W S W^H) = det(S) |det W|^2, no cancellation
            _, ld = np.linalg.slogdet(G)
            return ld + np.sum(np.log(s)), True
        M = (W * s[None, None, :]) @ np.conj(np.swapaxes(W, 1, 2))
        _, ld = np.linalg.slogdet(M)
        if not np.all(np.isfinite(ld)):
            # numerically singular for some draw
            return None, False
        return ld, True
    if np.any(s == 0):
        return None, False
    _, G = _draws(spec, n)
    _, ld = np.linalg.slogdet(G)
    return ld + np.sum(np.log(s)), True


def _deterministic_value(spec, s):
    kind = spec.kind
    n = s.size
    if kind == 'trace':
        return UtilityValue(float(np.sum(s)))
    if kind == 'det':
        # evaluated in the log domain
        if np.any(s == 0):
            return UtilityValue(-np.inf, 0.0, True)
        return UtilityValue(float(np.sum(np.log(s))))
    if kind == 'harmonic':
        if np.any(s == 0):
            return UtilityValue(0.0)
        return UtilityValue(float(1.0 / np.sum(1.0 / s)))
    if kind == 'logdet_shifted':
        return UtilityValue(float(np.sum(np.log1p(spec.shift * s))))
    if kind == 'jensen_upper_1':
        return UtilityValue(float(spec.n_rx * np.log1p(n * np.sum(s))))
    if kind == 'jensen_upper_2':
        return UtilityValue(float(np.sum(np.log1p(n * spec.n_rx * s))))
    raise AssertionError(kind)


def evaluate(spec: UtilitySpec, s) -> UtilityValue:
    """
    Utility value at eigenvalue vector `s`.

    Monte Carlo kinds return the sample mean and its standard error.
    Log-type kinds at singular arguments return ``-inf`` with the
    `singular` flag set instead of raising.
    """
    s = _check_profile(s)
    if spec.kind in MC_KINDS:
        return _mc_value(spec, s)
    return _deterministic_value(spec, s)


def gradient(spec: UtilitySpec, s) -> np.ndarray:
    """
    Gradient of `evaluate` with respect to `s`, on the same frozen draws.

    Raises
    ------
    NonDifferentiableError
        For determinant-type kinds at singular arguments.
    """
    s = _check_profile(s)
    kind = spec.kind
    n = s.size
    if kind == 'mutual_info':
        return np.mean(_logdet_terms(spec, s)[1], axis=0)
    if kind == 'mmse_bound':
        return -np.mean(_trace_inv_terms(spec, s)[1], axis=0)
    if kind == 'expected_det':
        x, g = _logdet_terms(spec, s)
        return np.mean(np.exp(x)[:, None] * g, axis=0)
    if kind == 'trace_posterior':
        if np.any(s == 0):
            raise NonDifferentiableError('singular argument')
        return np.mean(_posterior_terms(spec, s)[1], axis=0)
    if kind in ('expected_logdet', 'minkowski_lower'):
        x, ok = _lower_logdet_terms(spec, s)
        if not ok:
            raise NonDifferentiableError('singular argument')
        if n >= spec.n_rx:
            W, _ = _draws(spec, n)
            WH = np.conj(np.swapaxes(W, 1, 2))
            M = (W * s[None, None, :]) @ WH
            X = np.linalg.solve(M, W)
            g = np.mean(np.real(np.sum(np.conj(W) * X, axis=1)), axis=0)
        else:
            g = 1.0 / s
        if kind == 'expected_logdet':
            return g
        k = min(n, spec.n_rx)
        z = np.mean(x) / k
        return g / (1.0 + np.exp(-z))
    if kind == 'trace':
        return np.ones(n)
    if kind == 'det':
        if np.any(s == 0):
            raise NonDifferentiableError('singular argument')
        return 1.0 / s
    if kind == 'harmonic':
        if np.any(s == 0):
            raise NonDifferentiableError('singular argument')
        h = 1.0 / np.sum(1.0 / s)
        return h * h / (s * s)
    if kind == 'logdet_shifted':
        return spec.shift / (1.0 + spec.shift * s)
    if kind == 'jensen_upper_1':
        return np.full(n, spec.n_rx * n / (1.0 + n * np.sum(s)))
    if kind == 'jensen_upper_2':
        c = n * spec.n_rx
        return c / (1.0 + c * s)
    raise AssertionError(kind)



class Objective:
    """
    Value and gradient callables bound to one spec.

    Used by the optimizers, which only need plain floats and arrays.
    """

    def __init__(self, spec: UtilitySpec):
        self.spec = spec

    def value(self, s) -> float:
        return evaluate(self.spec, s).value

    def grad(self, s) -> np.ndarray:
        return gradient(self.spec, s)

    def full(self, s) -> UtilityValue:
        return evaluate(self.spec, s)
