"""
Pareto border of the reachable effective-SNR profiles, aligned domain.

Every border point is the largest multiple ``nu * e`` of a direction ``e``
on the unit simplex. With a shared energy budget (energy boost) ``nu`` is
quasi-concave in the pilot eigenvalues ``p`` and its reciprocal
``1/nu + 1`` is convex, which is what gets minimized. With separate pilot
and data budgets the maximizer has a closed form.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple, Optional

import numpy as np
from scipy.stats import qmc

from ._solvers import project_box_budget, project_box_simplex, projected_ascent
from .channel_model import SystemConfig, snr_profile_vec

__all__ = ['as_direction', 'RayResult', 'eta_and_q', 'nu', 'nu_breve',
           'nu_breve_grad', 'maximize_nu_boost', 'fixed_budget_q',
           'nu_bar_reciprocal', 'nu_bar_reciprocal_grad',
           'closed_form_pilots', 'minimize_nu_bar_reciprocal',
           'maximize_nu_fixed_budgets', 'border_directions', 'sample_border',
           'dominates', 'max_threads']

INTERIOR = 1e-9


def max_threads() -> int:
    """Thread cap from ``TRAINPRECODE_THREADS`` (default: CPU count)."""
    env = os.environ.get('TRAINPRECODE_THREADS')
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def as_direction(e) -> np.ndarray:
    """Validate a non-negative direction and scale it to unit 1-norm."""
    e = np.array(e, dtype=float).ravel()
    if e.size == 0 or np.any(e < 0) or not np.all(np.isfinite(e)):
        raise ValueError('direction must be a non-negative vector')
    tot = e.sum()
    if tot <= 0:
        raise ValueError('direction must have a positive entry')
    return e / tot


class RayResult(NamedTuple):
    e: np.ndarray
    p: np.ndarray
    q: np.ndarray
    s: np.ndarray
    nu: float
    eta: float


def _c(p, r, idx):
    """``(1 + r p) / (r^2 p)`` on the indices `idx`."""
    return (1.0 + r[idx] * p[idx]) / (r[idx] ** 2 * p[idx])


def _prep(p, e, cfg):
    e = as_direction(e)
    p = np.asarray(p, dtype=float)
    r = np.asarray(cfg.r, dtype=float)
    if p.shape != e.shape or p.shape != r.shape:
        raise ValueError('p, e and channel eigenvalues must match')
    idx = np.flatnonzero(e > 0)
    if np.any(p[idx] <= 0):
        raise ValueError('p must be positive where e is positive')
    return p, e, r, idx


def eta_and_q(p, e, cfg: SystemConfig):
    """
    Data eigenvalues that make ``s(p, q)`` parallel to `e` at full energy.

    ``eta = (T mu - sum p) / (T - T_tau) / sum_i e_i c_i`` and
    ``q_i = eta e_i c_i`` with ``c_i = (1 + r_i p_i) / (r_i^2 p_i)``.
    """
    p, e, r, idx = _prep(p, e, cfg)
    left = max(cfg.total_energy - p.sum(), 0.0) / cfg.data_slots
    c = _c(p, r, idx)
    eta = left / float(e[idx] @ c)
    q = np.zeros_like(p)
    q[idx] = eta * e[idx] * c
    return eta, q


def nu(p, e, cfg: SystemConfig) -> float:
    """1-norm of the profile reached along `e` with pilots `p`."""
    p, e, r, idx = _prep(p, e, cfg)
    eta, q = eta_and_q(p, e, cfg)
    return eta / (1.0 + float(r @ q) - eta)


def _breve_parts(p, e, r, idx, cfg):
    E = cfg.total_energy - p.sum()
    K = cfg.data_slots
    A = float(np.sum(e[idx] * _c(p, r, idx)))
    return E, K, A


def nu_breve(p, e, cfg: SystemConfig) -> float:
    """
    ``1/nu + 1``, convex in `p` on the interior of the energy simplex.

    Equals ``(T - T_tau) / (T mu - sum p) * sum e_i c_i
    + sum e_i (1 + 1/(r_i p_i))``; ``+inf`` at full pilot energy.
    """
    p, e, r, idx = _prep(p, e, cfg)
    E, K, A = _breve_parts(p, e, r, idx, cfg)
    if E <= 0:
        return np.inf
    return K * A / E + float(np.sum(e[idx] * (1.0 + 1.0 / (r[idx] * p[idx]))))


def nu_breve_grad(p, e, cfg: SystemConfig) -> np.ndarray:
    """Gradient of `nu_breve`; zero on indices where ``e_i = 0``."""
    p, e, r, idx = _prep(p, e, cfg)
    E, K, A = _breve_parts(p, e, r, idx, cfg)
    g = np.zeros_like(p)
    pj, rj, ej = p[idx], r[idx], e[idx]
    g[idx] = K * (-ej / (rj * rj * pj * pj * E) + A / (E * E)) \
        - ej / (rj * pj * pj)
    return g


def maximize_nu_boost(e, cfg: SystemConfig, p0=None,
                      ftol=1e-12) -> RayResult:
    """
    Border point along `e` under the shared energy budget.

    Minimizes `nu_breve` by projected gradient over
    ``{p_i >= 1e-9 T mu on the support of e, sum p <= T mu}``. A start `p0`
    is only ever improved on.
    """
    e = as_direction(e)
    r = np.asarray(cfg.r, dtype=float)
    idx = np.flatnonzero(e > 0)
    n = e.size
    Tmu = cfg.total_energy
    lo = INTERIOR * Tmu
    es, rs = e[idx], r[idx]
    K = cfg.data_slots

    def obj(x):
        E = Tmu - x.sum()
        if E <= 0 or np.any(x <= 0):
            return -np.inf
        A = float(np.sum(es * (1.0 + rs * x) / (rs * rs * x)))
        return -(K * A / E + float(np.sum(es * (1.0 + 1.0 / (rs * x)))))

    def grad(x):
        E = Tmu - x.sum()
        A = float(np.sum(es * (1.0 + rs * x) / (rs * rs * x)))
        return -(K * (-es / (rs * rs * x * x * E) + A / (E * E))
                 - es / (rs * x * x))

    def proj(y):
        return project_box_budget(y, lo, Tmu * (1.0 - 1e-12))

    if p0 is None:
        # pilots and data share the energy half and half
        x0 = np.full(idx.size, 0.5 * Tmu / idx.size)
    else:
        x0 = np.maximum(np.asarray(p0, dtype=float)[idx], lo)
    x, _, _ = projected_ascent(obj, grad, proj, x0, ftol=ftol, xtol=1e-10)
    p = np.zeros(n)
    p[idx] = x
    eta, q = eta_and_q(p, e, cfg)
    val = eta / (1.0 + float(r @ q) - eta)
    return RayResult(e, p, q, val * e, val, eta)


# separate budgets ---------------------------------------------------------

def fixed_budget_q(p, e, r, mu_q):
    """``q_i = mu_q e_i c_i / sum_j e_j c_j`` and ``eta``."""
    e = as_direction(e)
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    idx = np.flatnonzero(e > 0)
    c = _c(p, r, idx)
    eta = mu_q / float(e[idx] @ c)
    q = np.zeros_like(p)
    q[idx] = eta * e[idx] * c
    return eta, q


def nu_bar_reciprocal(p, e, r, mu_q) -> float:
    """
    ``1 / nu_bar = sum e_i (1/mu_q + r_i) / (r_i^2 p_i) + sum e_i / (mu_q r_i)``.
    """
    e = as_direction(e)
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    idx = np.flatnonzero(e > 0)
    ei, ri, pi = e[idx], r[idx], p[idx]
    return float(np.sum(ei * (1.0 / mu_q + ri) / (ri * ri * pi))
                 + np.sum(ei / ri) / mu_q)


def nu_bar_reciprocal_grad(p, e, r, mu_q) -> np.ndarray:
    e = as_direction(e)
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    idx = np.flatnonzero(e > 0)
    g = np.zeros_like(p)
    g[idx] = -e[idx] * (1.0 / mu_q + r[idx]) / (r[idx] ** 2 * p[idx] ** 2)
    return g


def closed_form_pilots(e, r, mu_p, mu_q) -> np.ndarray:
    """
    ``p_i = mu_p w_i / sum_j w_j`` with ``w_i = sqrt(e_i (1 + mu_q r_i)) / r_i``.
    """
    e = as_direction(e)
    r = np.asarray(r, dtype=float)
    w = np.sqrt(e * (1.0 + mu_q * r)) / r
    return mu_p * w / w.sum()


def minimize_nu_bar_reciprocal(e, r, mu_p, mu_q, p0=None, max_iter=20000):
    """
    Numerical minimizer of ``1/nu_bar`` on ``{sum p = mu_p}`` by projected
    gradient, independent of the closed form.
    """
    e = as_direction(e)
    r = np.asarray(r, dtype=float)
    idx = np.flatnonzero(e > 0)
    lo = INTERIOR * mu_p
    e1 = e.copy()

    def full(x):
        p = np.zeros_like(e1)
        p[idx] = x
        return p

    def f(x):
        if np.any(x <= 0):
            return -np.inf
        return -nu_bar_reciprocal(full(x), e1, r, mu_q)

    def g(x):
        return -nu_bar_reciprocal_grad(full(x), e1, r, mu_q)[idx]

    def proj(y):
        return project_box_simplex(y, lo, mu_p)

    x0 = np.full(idx.size, mu_p / idx.size) if p0 is None \
        else np.asarray(p0, dtype=float)[idx]
    x, _, _ = projected_ascent(f, g, proj, x0, max_iter=max_iter, ftol=0.0,
                               xtol=1e-14)
    return full(x)


def maximize_nu_fixed_budgets(e, mu_p, mu_q, cfg: SystemConfig) -> RayResult:
    """Border point along `e` with separate budgets, in closed form."""
    e = as_direction(e)
    r = np.asarray(cfg.r, dtype=float)
    p = closed_form_pilots(e, r, mu_p, mu_q)
    eta, q = fixed_budget_q(p, e, r, mu_q)
    val = eta / (1.0 + float(r @ q) - eta)
    return RayResult(e, p, q, val * e, val, eta)


# border sampling ----------------------------------------------------------

def border_directions(n_dirs: int, n: int) -> np.ndarray:
    """
    Deterministic directions: the coordinate vertices first, then a
    low-discrepancy cover of the simplex (an even grid when ``n == 2``).
    """
    if n_dirs < 1:
        raise ValueError('n_dirs must be positive')
    verts = np.eye(n)
    if n_dirs <= n:
        return verts[:n_dirs]
    if n == 2:
        t = np.linspace(0.0, 1.0, n_dirs)
        return np.column_stack([1.0 - t, t])[np.r_[0, n_dirs - 1,
                                                   1:n_dirs - 1]]
    m = n_dirs - n
    u = qmc.Halton(d=n - 1, scramble=False).random(m + 1)[1:]
    # sorted uniforms to spacings maps the cube onto the simplex
    u = np.sort(u, axis=1)
    pts = np.diff(np.column_stack([np.zeros(m), u, np.ones(m)]), axis=1)
    return np.vstack([verts, pts])


def sample_border(n_dirs: int, mode: str, cfg: SystemConfig,
                  budgets: Optional[tuple] = None, threads=None):
    """
    One border point per direction from `border_directions`.

    Parameters
    ----------
    mode : {'boost', 'fixed_budgets'}
    budgets : (mu_p, mu_q), required for 'fixed_budgets'
    """
    dirs = border_directions(n_dirs, cfg.n_tx)
    if mode == 'boost':
        def job(e):
            return maximize_nu_boost(e, cfg)
    elif mode == 'fixed_budgets':
        if budgets is None:
            raise ValueError('fixed_budgets mode needs (mu_p, mu_q)')
        mu_p, mu_q = budgets

        def job(e):
            return maximize_nu_fixed_budgets(e, mu_p, mu_q, cfg)
    else:
        raise ValueError(f'unknown mode {mode!r}')
    workers = min(threads or max_threads(), len(dirs))
    if workers <= 1:
        return [job(e) for e in dirs]
    with ThreadPoolExecutor(workers) as ex:
        return list(ex.map(job, dirs))


def dominates(a, b, rel=1e-6) -> bool:
    """
    Whether `a` dominates `b` beyond a margin of ``rel * max(b)``: no entry
    below ``b - margin`` and at least one above ``b + margin``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    tol = rel * float(np.max(np.abs(b)))
    return bool(np.all(a >= b - tol) and np.any(a > b + tol))
