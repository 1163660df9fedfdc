"""Projected gradient ascent and the Euclidean projections it needs."""

import numpy as np

ARMIJO = 1e-4


def project_simplex(y, total=1.0):
    """Euclidean projection onto ``{x >= 0, sum(x) = total}`` (sort based)."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        return y.copy()
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - total
    k = np.arange(1, y.size + 1)
    cond = u - css / k > 0
    rho = k[cond][-1]
    theta = css[cond][-1] / rho
    return np.maximum(y - theta, 0.0)


def project_capped_simplex(y, total=1.0):
    """Euclidean projection onto ``{x >= 0, sum(x) <= total}``."""
    x = np.maximum(np.asarray(y, dtype=float), 0.0)
    if x.sum() <= total:
        return x
    return project_simplex(y, total)


def project_box_budget(y, lower, total):
    """Projection onto ``{x >= lower, sum(x) <= total}``."""
    lower = np.broadcast_to(np.asarray(lower, dtype=float), np.shape(y))
    return lower + project_capped_simplex(np.asarray(y) - lower,
                                          total - lower.sum())


def project_box_simplex(y, lower, total):
    """Projection onto ``{x >= lower, sum(x) = total}``."""
    lower = np.broadcast_to(np.asarray(lower, dtype=float), np.shape(y))
    return lower + project_simplex(np.asarray(y) - lower, total - lower.sum())


def projected_ascent(f, grad, project, x0, max_iter=5000, ftol=1e-9,
                     xtol=np.inf, step0=None):
    """
    Maximize `f` over a convex set given by its projection.

    Barzilai-Borwein trial steps with Armijo backtracking (halving, constant
    1e-4). Every accepted iterate improves on the previous one, so the
    result is never worse than `x0` after projection.

    Stops when the relative change of `f` falls below `ftol` and the step
    is below ``xtol * (1 + |x|)``, or after `max_iter` iterations.

    Returns
    -------
    x, fx, n_iter
    """
    x = project(np.asarray(x0, dtype=float))
    fx = f(x)
    if not np.isfinite(fx):
        return x, fx, 0
    g = grad(x)
    t = step0 if step0 is not None else 1.0 / max(np.linalg.norm(g), 1e-12)
    it = 0
    for it in range(1, max_iter + 1):
        accepted = False
        while t > 1e-30:
            xn = project(x + t * g)
            d = xn - x
            if not np.any(d):
                return x, fx, it
            fn = f(xn)
            if np.isfinite(fn) and fn >= fx + ARMIJO * float(g @ d):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            return x, fx, it
        gn = grad(xn)
        small_f = abs(fn - fx) <= ftol * max(1.0, abs(fx))
        small_x = np.linalg.norm(d) <= xtol * (1.0 + np.linalg.norm(x))
        sy = float(d @ (gn - g))
        x, fx, g = xn, fn, gn
        if small_f and small_x:
            break
        t = float(d @ d) / -sy if sy < 0 else 4.0 * t
    return x, fx, it
