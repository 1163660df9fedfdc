"""
Brute-force and analytic reference values.

Nothing here calls the optimizers. The grid search has its own evaluator for
one or two transmit modes, written from the raw channel draws, so the only
thing shared with the library is the sample stream itself (needed to compare
sample averages to 1e-3 when their standard error is larger).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, special

from . import utilities
from .channel_model import SystemConfig, sample_whitened_batch

__all__ = ['GridSpec', 'GridResult', 'OracleError', 'grid_search_joint',
           'grid_objective', 'quadrature_1x1', 'finite_diff_gradient']

ORACLE_KINDS = ('mutual_info', 'mmse_bound', 'trace')


class OracleError(ValueError):
    """Request outside what the oracle is willing to brute-force."""


@dataclass(frozen=True)
class GridSpec:
    """
    Parameters
    ----------
    resolution : int
        Points per free axis on every pass.
    mode : {'boost', 'fixed_budgets'}
    cfg : SystemConfig
    budgets : (mu_p, mu_q), for 'fixed_budgets'
    refinements : int
        Extra passes; each one re-grids a box of a few cells around the
        incumbent, so the effective resolution grows geometrically.
    """
    resolution: int
    mode: str
    cfg: SystemConfig
    budgets: Optional[tuple] = None
    refinements: int = 0

    def __post_init__(self):
        if self.resolution < 2:
            raise OracleError('resolution must be at least 2')
        if self.mode not in ('boost', 'fixed_budgets'):
            raise OracleError(f'unknown mode {self.mode!r}')
        if self.mode == 'fixed_budgets' and self.budgets is None:
            raise OracleError('fixed_budgets needs (mu_p, mu_q)')


@dataclass
class GridResult:
    p: np.ndarray
    q: np.ndarray
    utility: float
    n_evals: int


# raw evaluator ------------------------------------------------------------

class _Draws:
    """Per-draw Gram entries of the channel draws for one or two columns."""

    def __init__(self, spec, n):
        W = sample_whitened_batch(spec.n_rx, n, int(spec.master_seed),
                                  int(spec.mc_samples))
        col = [W[:, :, j] for j in range(n)]
        self.g = [np.sum(np.abs(c) ** 2, axis=1) for c in col]
        if n == 2:
            g12 = np.sum(np.conj(col[0]) * col[1], axis=1)
            self.det = np.maximum(self.g[0] * self.g[1] - np.abs(g12) ** 2,
                                  0.0)
        self.n = n


def grid_objective(spec: utilities.UtilitySpec, n: int):
    """
    Batched utility ``f(S)`` for profiles given as rows, ``n <= 2`` modes.

    Returns a callable mapping an ``(M, n)`` array to ``M`` values.
    """
    if spec.kind not in ORACLE_KINDS:
        raise OracleError(f'no oracle evaluator for {spec.kind!r}')
    if n > 2:
        raise OracleError('the grid oracle handles at most two modes')
    if spec.kind == 'trace':
        return lambda S: np.sum(S, axis=1)
    d = _Draws(spec, n)

    def det_and_trace(S):
        if n == 1:
            det = 1.0 + S[:, :1] * d.g[0][None, :]
            return det, 1.0 / det
        a = S[:, :1] * d.g[0][None, :]
        b = S[:, 1:2] * d.g[1][None, :]
        det = 1.0 + a + b + S[:, :1] * S[:, 1:2] * d.det[None, :]
        return det, (2.0 + a + b) / det

    def f(S, chunk=max(1, 2_000_000 // int(spec.mc_samples))):
        S = np.atleast_2d(np.asarray(S, dtype=float))
        out = np.empty(S.shape[0])
        for i in range(0, S.shape[0], chunk):
            det, tr = det_and_trace(S[i:i + chunk])
            if spec.kind == 'mutual_info':
                out[i:i + chunk] = np.mean(np.log(det), axis=1)
            else:
                out[i:i + chunk] = -(spec.streams - n + np.mean(tr, axis=1))
        return out

    return f


def _profiles(p, q, r):
    """Mode-indexed effective SNR rows for rows of pilot and data values."""
    rt = r / (1.0 + r * p)
    rh = r - rt
    return rh * q / (1.0 + np.sum(q * rt, axis=1, keepdims=True))


def _allocations(u, grid: GridSpec, support):
    """
    Map unit-cube points to full-energy ``(p, q)`` rows.

    Boost: ``u = (pilot share of T mu, pilot split, data split)``. Fixed
    budgets: ``u = (pilot split, data split)``. Splits only act on the modes
    in `support`.
    """
    cfg = grid.cfg
    n = cfg.n_tx
    m = u.shape[0]
    p = np.zeros((m, n))
    q = np.zeros((m, n))
    if grid.mode == 'boost':
        share, rest = u[:, 0], u[:, 1:]
        e_p = share * cfg.total_energy
        e_q = (1.0 - share) * cfg.total_energy / cfg.data_slots
    else:
        mu_p, mu_q = grid.budgets
        rest = u
        e_p = np.full(m, float(mu_p))
        e_q = np.full(m, float(mu_q))
    if n == 1:
        p[:, 0], q[:, 0] = e_p, e_q
        return p, q
    if len(support) == 1:
        j = support[0]
        p[:, j] = e_p
        # data on the unpiloted mode is wasted, keep the split anyway
        q[:, j] = rest[:, 1] * e_q
        q[:, 1 - j] = (1.0 - rest[:, 1]) * e_q
        return p, q
    p[:, 0], p[:, 1] = rest[:, 0] * e_p, (1.0 - rest[:, 0]) * e_p
    q[:, 0], q[:, 1] = rest[:, 1] * e_q, (1.0 - rest[:, 1]) * e_q
    return p, q


def grid_search_joint(grid: GridSpec, spec: utilities.UtilitySpec):
    """
    Exhaustive search over full-energy aligned allocations.

    The free coordinates are the energy shares (one to three of them); the
    first pass is an even grid of `resolution` points per axis, each
    refinement re-grids the box of +-2 cells around the incumbent. Ties go
    to the lowest linear index.

    Returns
    -------
    GridResult
    """
    cfg = grid.cfg
    n = cfg.n_tx
    if n > 2:
        raise OracleError('grid oracle refuses more than two transmit modes')
    f = grid_objective(spec, n)
    r = np.asarray(cfg.r, dtype=float)
    if n == 1:
        supports = [(0,)]
    elif min(cfg.training_duration, n) >= 2:
        supports = [(0, 1)]
    else:
        supports = [(0,), (1,)]
    n_axes = (1 if grid.mode == 'boost' else 0) + (n - 1) * 2
    if n_axes == 0:
        u = np.zeros((1, 0))
        p, q = _allocations(u, grid, supports[0])
        val = f(_profiles(p, q, r))
        return GridResult(p[0], q[0], float(val[0]), 1)

    best = (-np.inf, None, None)
    evals = 0
    for sup in supports:
        lo = np.zeros(n_axes)
        hi = np.ones(n_axes)
        inc = None
        for level in range(grid.refinements + 1):
            axes = [np.linspace(a, b, grid.resolution) for a, b in zip(lo, hi)]
            u = np.stack(np.meshgrid(*axes, indexing='ij'), -1)
            u = u.reshape(-1, n_axes)
            if grid.mode == 'boost':
                # all energy on pilots leaves nothing to send
                u = u[u[:, 0] < 1.0]
            p, q = _allocations(u, grid, sup)
            vals = f(_profiles(p, q, r))
            evals += vals.size
            i = int(np.argmax(vals))
            if inc is None or vals[i] > inc[0]:
                inc = (float(vals[i]), p[i], q[i], u[i])
            cell = (hi - lo) / (grid.resolution - 1)
            lo = np.maximum(inc[3] - 2.0 * cell, 0.0)
            hi = np.minimum(inc[3] + 2.0 * cell, 1.0)
        if inc[0] > best[0]:
            best = inc[:3]
    return GridResult(best[1], best[2], best[0], evals)


# quadrature ---------------------------------------------------------------

def quadrature_1x1(kind: str, s: float, route: str = 'direct') -> float:
    """
    Single-antenna Rayleigh expectations with ``x ~ Exp(1)``.

    ``mutual_info``: ``E log(1 + s x)``; ``mmse_inner``: ``E 1/(1 + s x)``.

    Parameters
    ----------
    route : {'direct', 'parts', 'closed'}
        'direct' integrates the expectation as written, 'parts' integrates
        the form obtained by integrating by parts, ``int e^{-u}/(1/s + u)``,
        and 'closed' uses ``e^{1/s} E1(1/s)``.
    """
    if kind not in ('mutual_info', 'mmse_inner'):
        raise ValueError(f'unknown kind {kind!r}')
    s = float(s)
    if s < 0 or not np.isfinite(s):
        raise ValueError('s must be finite and non-negative')
    if s == 0:
        return 0.0 if kind == 'mutual_info' else 1.0
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=500)
    if route == 'direct':
        if kind == 'mutual_info':
            fun = lambda x: np.log1p(s * x) * np.exp(-x)
        else:
            fun = lambda x: np.exp(-x) / (1.0 + s * x)
        return integrate.quad(fun, 0.0, np.inf, **opts)[0]
    if route == 'parts':
        # E log(1+sx) = int e^{-u}/(1/s+u) du and E 1/(1+sx) = that / s
        val = integrate.quad(lambda u: np.exp(-u) / (1.0 / s + u), 0.0,
                             np.inf, **opts)[0]
        return val if kind == 'mutual_info' else val / s
    if route == 'closed':
        z = 1.0 / s
        # exp(z) E1(z) overflows past z ~ 700, the continued fraction does not
        val = np.exp(z) * special.exp1(z) if z < 500 else _exp_e1_cf(z)
        return float(val if kind == 'mutual_info' else val * z)
    raise ValueError(f'unknown route {route!r}')


def _exp_e1_cf(z, terms=200):
    """``e^z E1(z)`` by its continued fraction, accurate for large z."""
    f = 0.0
    for k in range(terms, 0, -1):
        f = k / (1.0 + k / (z + f))
    return 1.0 / (z + f)


# finite differences -------------------------------------------------------

def finite_diff_gradient(spec: utilities.UtilitySpec, s, h: float):
    """
    Central differences of the frozen-sample utility, one-sided on entries
    closer than `h` to zero.

    Raises
    ------
    utilities.NonDifferentiableError
        At singular points of the det family.
    ValueError
        If `h` is outside ``[1e-6, 1e-3] * max(max(s), 1)``.
    """
    s = np.asarray(s, dtype=float)
    scale = max(float(np.max(s)) if s.size else 0.0, 1.0)
    if not (1e-6 * scale <= h <= 1e-3 * scale):
        raise ValueError('step outside [1e-6, 1e-3] * max(s, 1)')
    base = utilities.evaluate(spec, s)
    if base.singular and spec.kind in utilities.QUASI_CONCAVE:
        raise utilities.NonDifferentiableError(
            f'{spec.kind} is not differentiable at a singular profile')

    def val(x):
        return utilities.evaluate(spec, x).value

    g = np.empty_like(s)
    for i in range(s.size):
        up = s.copy()
        up[i] += h
        if s[i] >= h:
            dn = s.copy()
            dn[i] -= h
            g[i] = (val(up) - val(dn)) / (2.0 * h)
        else:
            up2 = s.copy()
            up2[i] += 2.0 * h
            # second order one-sided stencil
            g[i] = (-3.0 * base.value + 4.0 * val(up) - val(up2)) / (2.0 * h)
    return g
