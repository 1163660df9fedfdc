"""
Precoder design for prescribed pilots.

For a fixed pilot Gram ``P`` and a trace budget ``mu_q`` on the transmit
covariance, the reachable effective-SNR profiles form a simplex. Its
vertices follow from the generalized eigenvalues ``w`` of the pencil
``(R_hat, I/mu_q + R_tilde)``. The utility is maximized over barycentric
weights on that simplex and the transmit covariance is then rebuilt from
the generalized eigenvectors.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import utilities
from ._solvers import project_capped_simplex, projected_ascent
from .channel_model import (ChannelCovariance, GramMatrix,
                            estimation_covariances, effective_snr,
                            r_hat_vec, r_tilde_vec, _matrix)
from .hermitian_kernels import (LinAlgValidationError, as_hermitian, gevp,
                                numeric_rank, pinv, psd_function)

__all__ = ['LinearFractionalMap', 'SimplexRegion', 'PrecoderResult',
           'lf_apply', 'lf_invert', 'segment_beta', 'simplex_vertices',
           'simplex_region', 'barycentric', 'simplex_residual',
           'covariance_for_profile', 'optimize_precoder',
           'optimize_precoder_aligned']

DENOM_TOL = 1e-12


@dataclass(frozen=True)
class LinearFractionalMap:
    """``X -> A X A^H / (1 + tr(B X))``."""
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=complex))
        B = as_hermitian(self.B, 'B')
        if B.shape[0] != A.shape[1]:
            raise ValueError('B must be n x n for an m x n matrix A')
        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'B', B)


def _tr(B, X):
    return float(np.real(np.trace(B @ X)))


def lf_apply(lf: LinearFractionalMap, X) -> np.ndarray:
    """Apply the map; raises if the denominator is not positive."""
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    den = 1.0 + _tr(lf.B, X)
    if den <= DENOM_TOL:
        raise LinAlgValidationError('denominator 1 + tr(BX) is not positive')
    Y = lf.A @ X @ lf.A.conj().T / den
    return 0.5 * (Y + Y.conj().T)


def lf_invert(lf: LinearFractionalMap, Y, mode='full_column_rank'):
    """
    Preimage of `Y` under the map.

    The inverse is again linear fractional, with parameters
    ``(A#, -A#^H B A#)`` where ``A#`` is the left inverse of a full column
    rank `A` or the right inverse of a full row rank `A`. In the row rank
    case the preimage is the one with range inside the range of ``A^H``.
    """
    A = lf.A
    if mode == 'full_column_rank':
        Ap = np.linalg.solve(A.conj().T @ A, A.conj().T)
    elif mode == 'full_row_rank':
        Ap = A.conj().T @ np.linalg.inv(A @ A.conj().T)
    else:
        raise ValueError(f'unknown mode {mode!r}')
    Y = np.atleast_2d(np.asarray(Y, dtype=complex))
    Z = Ap @ Y @ Ap.conj().T
    den = 1.0 - _tr(lf.B, Z)
    if den <= DENOM_TOL:
        raise LinAlgValidationError('Y lies outside the invertible region')
    X = Z / den
    return 0.5 * (X + X.conj().T)


def segment_beta(lf: LinearFractionalMap, X1, X2, alpha: float) -> float:
    """
    Weight ``beta`` with ``phi(a X1 + (1-a) X2) = beta phi(X1) + (1-beta) phi(X2)``.
    """
    t1 = _tr(lf.B, np.asarray(X1, dtype=complex))
    t2 = _tr(lf.B, np.asarray(X2, dtype=complex))
    return alpha * (1.0 + t1) / (1.0 + alpha * t1 + (1.0 - alpha) * t2)


def simplex_vertices(omegas, dim=None) -> np.ndarray:
    """
    Rows ``sigma^(0) .. sigma^(k)`` for positive non-increasing `omegas`.

    ``sigma^(n)`` has its first ``n`` entries equal to
    ``1 / sum_{j<=n} 1/w_j`` and zeros elsewhere.
    """
    w = np.asarray(omegas, dtype=float)
    k = w.size
    dim = k if dim is None else dim
    V = np.zeros((k + 1, dim))
    H = 1.0 / np.cumsum(1.0 / w)
    for n in range(1, k + 1):
        V[n, :n] = H[n - 1]
    return V


class SimplexRegion(NamedTuple):
    omegas: np.ndarray      # all generalized eigenvalues, non-increasing
    vertices: np.ndarray    # (r_p + 1) x N_T, first row is the origin
    basis: np.ndarray       # generalized eigenvectors, B-orthonormal
    r_p: int
    leak: np.ndarray        # v_i^H R_tilde v_i for the basis columns
    aligned: bool


def _aligned(r_hat, r_tilde, tol=1e-10):
    """Whether the range of ``R_hat`` is invariant under ``R_tilde``."""
    scale = max(1.0, np.linalg.norm(r_hat), np.linalg.norm(r_tilde))
    return np.linalg.norm(r_hat @ r_tilde - r_tilde @ r_hat) <= tol * scale


def simplex_region(P, R, mu_q: float) -> SimplexRegion:
    """Reachable profile simplex for pilots `P` and transmit budget `mu_q`."""
    if not mu_q > 0:
        raise ValueError('mu_q must be positive')
    Rm = _matrix(R)
    cov = estimation_covariances(_matrix(P), Rm)
    n = Rm.shape[0]
    eig = gevp(cov.r_hat, np.eye(n) / mu_q + cov.r_tilde)
    w = np.where(eig.values < 0, 0.0, eig.values)
    k = numeric_rank(np.linalg.eigvalsh(cov.r_hat))
    w[k:] = 0.0
    V = eig.basis[:, :k]
    leak = np.real(np.einsum('ij,ik,kj->j', V.conj(), cov.r_tilde, V))
    return SimplexRegion(w, simplex_vertices(w[:k], n), V, k, leak,
                         _aligned(cov.r_hat, cov.r_tilde))


def barycentric(region_or_omegas, s) -> np.ndarray:
    """
    Weights ``nu_1..nu_k`` of a non-increasing profile on the vertices.

    ``nu_n = (s_n - s_{n+1}) / H_n`` with ``H_n = 1 / sum_{j<=n} 1/w_j``.
    """
    w = getattr(region_or_omegas, 'omegas', region_or_omegas)
    k = getattr(region_or_omegas, 'r_p', None)
    w = np.asarray(w, dtype=float)
    if k is None:
        k = int(np.count_nonzero(w > 0))
    s = np.asarray(s, dtype=float)[:k]
    H = 1.0 / np.cumsum(1.0 / w[:k])
    return (s - np.append(s[1:], 0.0)) / H


def simplex_residual(region: SimplexRegion, s) -> float:
    """
    Largest violation of simplex membership for a profile `s`.

    Combines negative barycentric weights, weights summing above one and
    mass outside the first ``r_p`` entries. Zero means inside.
    """
    s = np.sort(np.asarray(s, dtype=float))[::-1]
    nu = barycentric(region, s)
    tail = s[region.r_p:]
    scale = max(1.0, float(region.omegas[0]) if region.r_p else 1.0)
    return max(0.0, -float(nu.min()) if nu.size else 0.0,
               float(nu.sum()) - 1.0 if nu.size else 0.0,
               float(tail.max()) / scale if tail.size else 0.0)


def covariance_for_profile(region: SimplexRegion, s, mu_q: float):
    """
    Transmit covariance whose effective SNR has eigenvalues `s`.

    `s` must be a point of the simplex in the order of the generalized
    eigenvalues. With ``d = xbar / (1 - leak^T xbar)``, ``xbar_i = s_i/w_i``,
    the result is ``V diag(d) V^H``; the map ``d -> xbar`` is linear
    fractional and is inverted as such.
    """
    k = region.r_p
    n = region.basis.shape[0]
    if k == 0:
        return np.zeros((n, n), dtype=complex)
    s = np.asarray(s, dtype=float)[:k]
    xbar = s / region.omegas[:k]
    lf = LinearFractionalMap(np.eye(k), np.diag(region.leak))
    D = lf_invert(lf, np.diag(xbar))
    d = np.maximum(np.real(np.diag(D)), 0.0)
    V = region.basis
    Q = (V * d) @ V.conj().T
    Q = 0.5 * (Q + Q.conj().T)
    # guard against roundoff pushing the trace past the budget
    tr = float(np.real(np.trace(Q)))
    if tr > mu_q:
        Q *= mu_q / tr
    return Q


class PrecoderResult(NamedTuple):
    Q: np.ndarray
    s: np.ndarray
    utility: float
    weights: Optional[np.ndarray]
    aligned: bool
    multistart: bool


def _maximize_weights(spec, V, k, x0):
    """Maximize ``f(V^T x)`` over ``{x >= 0, sum x <= 1}``."""
    def f(x):
        return utilities.evaluate(spec, V.T @ x).value

    def g(x):
        return V @ utilities.gradient(spec, V.T @ x)

    return projected_ascent(f, g, project_capped_simplex, x0)


def _starts(k, include=None):
    starts = [] if include is None else [include]
    starts.append(np.full(k, 1.0 / k))
    return starts


def optimize_precoder(P, R, mu_q: float, spec: utilities.UtilitySpec,
                      start=None) -> PrecoderResult:
    """
    Transmit covariance maximizing the utility for fixed pilots.

    The profile is parametrized as ``sum_n nu_n sigma^(n)`` and the weights
    are found by projected gradient ascent. Utilities that are only
    quasi-concave are run from several starts (`multistart` flag).

    Parameters
    ----------
    P, R : array_like or wrapper type
        Pilot Gram and channel covariance.
    mu_q : float
        Trace budget of the transmit covariance.
    spec : UtilitySpec
    start : array_like, optional
        Initial barycentric weights.
    """
    region = simplex_region(P, R, mu_q)
    n = region.basis.shape[0]
    k = region.r_p
    if k == 0:
        return PrecoderResult(np.zeros((n, n), dtype=complex), np.zeros(n),
                              utilities.evaluate(spec, np.zeros(n)).value,
                              np.zeros(0), region.aligned, False)
    V = region.vertices[1:]
    if spec.is_concave:
        x0 = np.full(k, 1.0 / k) if start is None else start
        x, fx, _ = _maximize_weights(spec, V, k, x0)
        multistart = False
    else:
        best = None
        cands = _starts(k, start) + [np.eye(k)[i] * 0.999
                                     + 0.001 / k for i in range(k)]
        for x0 in cands:
            x, fx, _ = _maximize_weights(spec, V, k, x0)
            if best is None or fx > best[1]:
                best = (x, fx)
        x, fx = best
        multistart = True
    s = V.T @ x
    Q = covariance_for_profile(region, s, mu_q)
    return PrecoderResult(Q, s, fx, x, region.aligned, multistart)


def optimize_precoder_aligned(p, r, mu_q: float, utility, q0=None,
                              ftol=1e-9):
    """
    Precoder eigenvalues for pilots aligned with the channel eigenbasis.

    Works on the mode-indexed vector ``s`` directly. The reachable set is
    ``{s >= 0, sum_i s_i / w_i <= 1}`` with ``w_i = rhat_i / (1/mu_q +
    rtilde_i)``, which is searched in the coordinates ``x_i = s_i / w_i``.
    Starting from `q0` makes the result at least as good as `q0`.

    Parameters
    ----------
    p, r : array_like
        Pilot and channel eigenvalues.
    mu_q : float
        Budget ``sum(q) <= mu_q``.
    utility : callable pair
        Object with ``value(s)`` and ``grad(s)`` acting on the full vector.

    Returns
    -------
    q, s, value
    """
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    n = p.size
    rh = r_hat_vec(p, r)
    rt = r_tilde_vec(p, r)
    sup = np.flatnonzero(rh > 0)
    if sup.size == 0 or mu_q <= 0:
        q = np.zeros(n)
        s = np.zeros(n)
        return q, s, utility.value(s)
    b = 1.0 / mu_q + rt[sup]
    w = rh[sup] / b
    # leak a_i = rtilde_i / b_i; q_i = d_i / b_i
    a = rt[sup] / b

    def s_of(x):
        s = np.zeros(n)
        s[sup] = w * x
        return s

    def f(x):
        return utility.value(s_of(x))

    def g(x):
        return w * utility.grad(s_of(x))[sup]

    if q0 is None:
        x0 = np.full(sup.size, 1.0 / sup.size)
    else:
        q0 = np.asarray(q0, dtype=float)
        s0 = rh * q0 / (1.0 + q0 @ rt)
        x0 = s0[sup] / w
    x, fx, _ = projected_ascent(f, g, project_capped_simplex, x0, ftol=ftol)
    d = x / (1.0 - a @ x)
    q = np.zeros(n)
    q[sup] = d / b
    tot = q.sum()
    if tot > mu_q:
        q *= mu_q / tot
    s = rh * q / (1.0 + q @ rt)
    return q, s, utility.value(s)
