"""
Pilot design for a prescribed precoder.

The search runs over the estimate covariance ``R_hat`` rather than over the
pilot Gram: for fixed ``Q`` the effective SNR has the same nonzero
eigenvalues as ``S' = Q^{1/2} R_hat Q^{1/2} / (tau - tr(Q R_hat))`` with
``tau = 1 + tr(Q R)``, and the set of ``R_hat`` reachable with pilot energy
``mu_p`` is convex. The pilot Gram is recovered as
``P = (R - R_hat)^{-1} - R^{-1}``.
"""

from typing import NamedTuple

import numpy as np

from . import utilities
from ._solvers import projected_ascent
from .channel_model import (ChannelCovariance, GramMatrix, effective_snr,
                            estimation_covariances, _matrix, _profile)
from .hermitian_kernels import (LinAlgValidationError, eig_hermitian,
                                numeric_rank, psd_function)

__all__ = ['EstimateCovDomain', 'PilotResult', 's_prime',
           'pilot_from_estimate_cov', 'project_estimate_cov',
           'optimize_pilot', 'optimize_pilot_aligned', 'commuting_basis']


class EstimateCovDomain:
    """
    Estimate covariances reachable with pilot energy `mu_p`.

    ``0 <= R_hat < R`` and ``tr((R - R_hat)^{-1}) - tr(R^{-1}) <= mu_p``.
    """

    def __init__(self, R, mu_p: float):
        self.R = _matrix(R)
        self.mu_p = float(mu_p)
        self._tr_rinv = float(np.real(np.trace(np.linalg.inv(self.R))))

    def energy(self, R_hat) -> float:
        """Pilot energy ``tr(P)`` needed to reach `R_hat`."""
        E = self.R - R_hat
        w = np.linalg.eigvalsh(0.5 * (E + E.conj().T))
        if w[0] <= 0:
            return np.inf
        return float(np.sum(1.0 / w)) - self._tr_rinv

    def contains(self, R_hat, tol=1e-9) -> bool:
        w = np.linalg.eigvalsh(0.5 * (R_hat + R_hat.conj().T))
        scale = max(1.0, float(np.abs(w).max()))
        if w[0] < -tol * scale:
            return False
        return self.energy(R_hat) <= self.mu_p + tol


def s_prime(R_hat, Q, R) -> np.ndarray:
    """``Q^{1/2} R_hat Q^{1/2} / (1 + tr(Q R) - tr(Q R_hat))``."""
    Rh = np.asarray(R_hat, dtype=complex)
    Qm, Rm = _matrix(Q), _matrix(R)
    den = 1.0 + float(np.real(np.trace(Qm @ Rm) - np.trace(Qm @ Rh)))
    if den <= 1e-12:
        raise LinAlgValidationError('denominator of S\' is not positive')
    Qh = psd_function(Qm, np.sqrt)
    S = Qh @ Rh @ Qh / den
    return 0.5 * (S + S.conj().T)


def pilot_from_estimate_cov(R_hat, R) -> np.ndarray:
    """
    Pilot Gram that produces the estimate covariance `R_hat`.

    Computed as ``R^{-1} R_hat (R - R_hat)^{-1}``, which equals
    ``(R - R_hat)^{-1} - R^{-1}`` and keeps the rank of `R_hat`.
    """
    Rm = _matrix(R)
    Rh = np.asarray(R_hat, dtype=complex)
    E = Rm - Rh
    E = 0.5 * (E + E.conj().T)
    w = np.linalg.eigvalsh(E)
    if w[0] <= 1e-10 * max(1.0, float(np.linalg.eigvalsh(Rm)[-1])):
        raise LinAlgValidationError(
            'R_hat must be strictly dominated by R (infinite pilot energy)')
    P = np.linalg.solve(Rm, Rh) @ np.linalg.inv(E)
    P = 0.5 * (P + P.conj().T)
    return psd_function(P, lambda v: v)


# aligned (eigenvalue) domain ---------------------------------------------

def _energy_vec(x, r):
    return float(np.sum(x / (r * (r - x))))


def _x_of_lambda(y, r, lam):
    """Coordinatewise minimizer of ``(x-y)^2/2 + lam/(r-x)`` on ``[0, r)``."""
    x = np.zeros_like(y)
    act = y * r * r > lam
    if not np.any(act):
        return x
    ya, ra = y[act], r[act]
    # phi(x) = (y - x)(r - x)^2 is convex and decreasing, Newton from the
    # left approaches the root monotonically
    xa = np.zeros_like(ya)
    for _ in range(200):
        u = ra - xa
        phi = (ya - xa) * u * u - lam
        dphi = -u * u - 2.0 * (ya - xa) * u
        step = phi / dphi
        xa = xa - step
        if np.all(np.abs(step) <= 1e-15 * np.maximum(ra, 1e-300)):
            break
    x[act] = np.clip(xa, 0.0, ra)
    return x


def project_estimate_cov(y, r, mu_p):
    """
    Euclidean projection onto ``{0 <= x < r, sum x/(r(r-x)) <= mu_p}``.

    The multiplier of the energy constraint is found by safeguarded
    bisection in log scale; the returned point is always feasible.
    """
    y = np.asarray(y, dtype=float)
    r = np.asarray(r, dtype=float)
    cap = r * (1.0 - 1e-12)
    x = np.clip(y, 0.0, cap)
    if _energy_vec(x, r) <= mu_p:
        return x
    lo, hi = 0.0, 1.0
    while _energy_vec(_x_of_lambda(y, r, hi), r) > mu_p:
        lo, hi = hi, hi * 4.0
    for _ in range(200):
        mid = 0.5 * (lo + hi) if lo == 0.0 else np.sqrt(lo * hi)
        if _energy_vec(_x_of_lambda(y, r, mid), r) > mu_p:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * hi:
            break
    return _x_of_lambda(y, r, hi)


def optimize_pilot_aligned(q, r, mu_p: float, utility, p0=None, ftol=1e-9):
    """
    Pilot eigenvalues for a precoder aligned with the channel eigenbasis.

    Maximizes ``f(s)`` with ``s_i = q_i x_i / (tau - q^T x)`` over the
    estimate eigenvalues ``x`` in the convex energy domain. Modes with
    ``q_i = 0`` get no pilot energy. Starting from `p0` makes the result at
    least as good as `p0`.

    Returns
    -------
    p, s, value
    """
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    n = q.size
    sup = np.flatnonzero(q > 0)
    if sup.size == 0 or mu_p <= 0:
        p = np.zeros(n)
        return p, np.zeros(n), utility.value(np.zeros(n))
    qs, rs = q[sup], r[sup]
    tau = 1.0 + float(q @ r)

    def s_of(x):
        s = np.zeros(n)
        s[sup] = qs * x / (tau - qs @ x)
        return s

    def f(x):
        return utility.value(s_of(x))

    def g(x):
        s = s_of(x)
        gs = utility.grad(s)
        D = tau - qs @ x
        return qs * (gs[sup] + gs @ s) / D

    def proj(y):
        return project_estimate_cov(y, rs, mu_p)

    if p0 is None:
        p_init = np.full(sup.size, mu_p / sup.size)
    else:
        p_init = np.asarray(p0, dtype=float)[sup]
    x0 = rs * rs * p_init / (1.0 + rs * p_init)
    x, fx, _ = projected_ascent(f, g, proj, x0, ftol=ftol)
    p = np.zeros(n)
    p[sup] = x / (rs * (rs - x))
    tot = p.sum()
    if tot > mu_p:
        p *= mu_p / tot
    s = r * r * p / (1.0 + r * p) * q / (1.0 + q @ (r / (1.0 + r * p)))
    return p, s, utility.value(s)


def commuting_basis(Q, R, tol=1e-10):
    """
    Common eigenbasis of `Q` and `R` if they commute, else None.

    Inside degenerate eigenspaces of `R` the basis diagonalizes `Q`.
    """
    Qm, Rm = _matrix(Q), _matrix(R)
    scale = max(1.0, np.linalg.norm(Qm), np.linalg.norm(Rm)) ** 2
    if np.linalg.norm(Qm @ Rm - Rm @ Qm) > tol * scale:
        return None
    eig = eig_hermitian(Rm)
    U = eig.basis.copy()
    w = eig.values
    i = 0
    while i < w.size:
        j = i + 1
        while j < w.size and abs(w[j] - w[i]) <= 1e-9 * max(abs(w[0]), 1e-300):
            j += 1
        if j - i > 1:
            blk = U[:, i:j]
            sub = eig_hermitian(blk.conj().T @ Qm @ blk)
            U[:, i:j] = blk @ sub.basis
        i = j
    return U


class PilotResult(NamedTuple):
    P: np.ndarray
    s: np.ndarray
    utility: float
    aligned: bool


def _spectral_objective(spec, Qm, Rm, k):
    """Value and gradient of ``T -> f(lambda(S(T T^H, Q)))``."""
    n = Rm.shape[0]
    Qh = psd_function(Qm, np.sqrt)
    tau = 1.0 + float(np.real(np.trace(Qm @ Rm)))

    def unpack(z):
        return (z[:n * k] + 1j * z[n * k:]).reshape(n, k)

    def parts(z):
        T = unpack(z)
        P = T @ T.conj().T
        cov = estimation_covariances(P, Rm)
        D = tau - float(np.real(np.trace(Qm @ cov.r_hat)))
        Sp = Qh @ cov.r_hat @ Qh / D
        Sp = 0.5 * (Sp + Sp.conj().T)
        w, U = np.linalg.eigh(Sp)
        w, U = w[::-1], U[:, ::-1]
        return T, cov, D, Sp, np.maximum(w, 0.0), U

    def f(z):
        *_, w, _ = parts(z)
        return utilities.evaluate(spec, w).value

    def g(z):
        T, cov, D, Sp, w, U = parts(z)
        Gs = (U * utilities.gradient(spec, w)) @ U.conj().T
        GX = (Qh @ Gs @ Qh + np.real(np.trace(Gs @ Sp)) * Qm) / D
        GP = cov.r_tilde @ GX @ cov.r_tilde
        GT = 2.0 * GP @ T
        return np.concatenate([GT.real.ravel(), GT.imag.ravel()])

    return f, g, unpack


def optimize_pilot(Q, R, mu_p: float, spec: utilities.UtilitySpec,
                   start=None) -> PilotResult:
    """
    Pilot Gram maximizing the utility for a fixed transmit covariance.

    When `Q` commutes with `R` the problem is solved on eigenvalues in the
    convex estimate-covariance domain. Otherwise a pilot factor ``T`` with
    ``rank(Q)`` columns and ``|T|_F^2 <= mu_p`` is optimized by projected
    gradient ascent on the sorted spectrum.
    """
    if not mu_p > 0:
        raise ValueError('mu_p must be positive')
    Qm, Rm = _matrix(Q), _matrix(R)
    n = Rm.shape[0]
    qeig = np.linalg.eigvalsh(Qm)
    if numeric_rank(qeig) == 0:
        return PilotResult(np.zeros((n, n), dtype=complex), np.zeros(n),
                           utilities.evaluate(spec, np.zeros(n)).value, True)
    U = commuting_basis(Qm, Rm)
    if U is not None:
        r = np.real(np.einsum('ij,ik,kj->j', U.conj(), Rm, U))
        q = np.real(np.einsum('ij,ik,kj->j', U.conj(), Qm, U))
        q = np.where(q > 1e-9 * q.max(), q, 0.0)
        obj = utilities.Objective(spec)
        p, s, val = optimize_pilot_aligned(q, r, mu_p, obj, p0=start)
        P = (U * p) @ U.conj().T
        return PilotResult(0.5 * (P + P.conj().T), s, val, True)
    k = numeric_rank(qeig)
    qe = eig_hermitian(Qm)
    if start is None:
        T0 = qe.basis[:, :k] * np.sqrt(mu_p / k)
    else:
        from .channel_model import gram_factor
        T0 = gram_factor(start)
        T0 = np.hstack([T0, np.zeros((n, max(0, k - T0.shape[1])))])[:, :k]
    f, g, unpack = _spectral_objective(spec, Qm, Rm, k)

    def proj(z):
        nz = float(z @ z)
        return z if nz <= mu_p else z * np.sqrt(mu_p / nz)

    z0 = np.concatenate([T0.real.ravel(), T0.imag.ravel()])
    z, fz, _ = projected_ascent(f, g, proj, z0)
    T = unpack(z)
    P = T @ T.conj().T
    prof = effective_snr(P, Qm, Rm).profile
    return PilotResult(0.5 * (P + P.conj().T), prof, fz, False)
