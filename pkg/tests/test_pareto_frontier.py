import numpy as np
import pytest
from hypothesis import given, strategies as st

from trainprecode import pareto_frontier as pf
from trainprecode.channel_model import SystemConfig, snr_profile_vec
from conftest import REF_EIGS

CFG = SystemConfig(2, 2, 10, 2, 10.0, REF_EIGS)        # T=10, mu=10
CFG6 = SystemConfig(2, 2, 10, 2, 1.0, REF_EIGS)        # T=10, mu=1


def random_cfg(rng, n=None):
    n = int(rng.integers(1, 4)) if n is None else n
    T = int(rng.integers(n + 1, 12))
    tt = int(rng.integers(1, min(T - 1, n) + 1))
    r = np.sort(rng.uniform(0.1, 2.0, n))[::-1]
    return SystemConfig(n, 2, T, tt, float(rng.uniform(0.1, 20)), r)


def interior_p(rng, cfg, e):
    w = rng.dirichlet(np.ones(cfg.n_tx)) * (e > 0)
    w /= w.sum()
    return w * cfg.total_energy * rng.uniform(0.05, 0.95)


def test_direction_validation():
    assert np.allclose(pf.as_direction([2.0, 2.0]), [0.5, 0.5])
    with pytest.raises(ValueError):
        pf.as_direction([0.0, 0.0])
    with pytest.raises(ValueError):
        pf.as_direction([1.0, -0.1])


def test_eta_q_examples():
    e = np.array([0.5, 0.5])
    eta, q = pf.eta_and_q([50.0, 50.0], e, CFG)
    assert eta == 0.0 and not np.any(q)
    cfg1 = SystemConfig(1, 1, 10, 1, 2.0, [0.8])
    eta, q = pf.eta_and_q([5.0], [1.0], cfg1)
    q1 = (20.0 - 5.0) / 9
    assert np.isclose(q[0], q1)
    assert np.isclose(eta, q1 * 0.64 * 5 / (1 + 0.8 * 5))
    with pytest.raises(ValueError):
        pf.eta_and_q([0.0, 1.0], e, CFG)


@given(st.integers(0, 10**6))
def test_eta_q_colinear_and_nu_consistent(seed):
    rng = np.random.default_rng(seed)
    cfg = random_cfg(rng)
    e = rng.dirichlet(np.ones(cfg.n_tx)) * (rng.random(cfg.n_tx) < 0.8)
    if not e.any():
        e[0] = 1.0
    e /= e.sum()
    p = interior_p(rng, cfg, e)
    eta, q = pf.eta_and_q(p, e, cfg)
    r = cfg.r
    rhat = r * r * p / (1 + r * p)
    assert np.allclose(rhat * q, eta * e, rtol=1e-10, atol=1e-12)
    assert np.all(q[e == 0] == 0)
    # full energy
    assert np.isclose(p.sum() + cfg.data_slots * q.sum(), cfg.total_energy, rtol=1e-10)
    v = pf.nu(p, e, cfg)
    s = snr_profile_vec(p, q, r)
    assert abs(v - s.sum()) <= 1e-10 * max(1.0, v)
    assert np.allclose(s, v * e, atol=1e-10 * max(1.0, v))


def test_nu_zero_at_full_pilot_energy():
    assert pf.nu([50.0, 50.0], [0.5, 0.5], CFG) == 0.0


def test_nu_breve_convex_500_pairs(rng):
    for _ in range(500):
        cfg = random_cfg(rng)
        e = rng.dirichlet(np.ones(cfg.n_tx))
        p1, p2 = interior_p(rng, cfg, e), interior_p(rng, cfg, e)
        m = pf.nu_breve(0.5 * (p1 + p2), e, cfg)
        assert m <= 0.5 * (pf.nu_breve(p1, e, cfg) + pf.nu_breve(p2, e, cfg)) + 1e-10


def test_nu_breve_is_reciprocal_plus_one(rng):
    for _ in range(50):
        cfg = random_cfg(rng)
        e = rng.dirichlet(np.ones(cfg.n_tx))
        p = interior_p(rng, cfg, e)
        assert np.isclose(pf.nu_breve(p, e, cfg), 1 / pf.nu(p, e, cfg) + 1, rtol=1e-12)


def test_nu_breve_gradient_fd(rng):
    for _ in range(30):
        cfg = random_cfg(rng)
        e = rng.dirichlet(np.ones(cfg.n_tx))
        p = interior_p(rng, cfg, e)
        g = pf.nu_breve_grad(p, e, cfg)
        for i in range(p.size):
            h = 1e-6 * p[i]
            up, dn = p.copy(), p.copy()
            up[i] += h
            dn[i] -= h
            fd = (pf.nu_breve(up, e, cfg) - pf.nu_breve(dn, e, cfg)) / (2 * h)
            assert abs(fd - g[i]) <= 1e-5 * max(1.0, abs(g[i]))


def test_quasi_concavity_along_segments(rng):
    e = np.array([0.5, 0.5])
    for _ in range(100):
        p1, p2 = interior_p(rng, CFG6, e), interior_p(rng, CFG6, e)
        v1, v2 = pf.nu(p1, e, CFG6), pf.nu(p2, e, CFG6)
        for a in np.linspace(0, 1, 11):
            assert pf.nu(a * p1 + (1 - a) * p2, e, CFG6) >= min(v1, v2) - 1e-10


def test_quasi_concavity_random_segments(rng):
    for _ in range(200):
        cfg = random_cfg(rng)
        e = rng.dirichlet(np.ones(cfg.n_tx))
        p1, p2 = interior_p(rng, cfg, e), interior_p(rng, cfg, e)
        a = rng.random()
        v = pf.nu(a * p1 + (1 - a) * p2, e, cfg)
        assert v >= min(pf.nu(p1, e, cfg), pf.nu(p2, e, cfg)) - 1e-10


def test_boost_single_mode_line_search():
    cfg = SystemConfig(1, 2, 8, 1, 3.0, [0.9])
    res = pf.maximize_nu_boost([1.0], cfg)
    grid = np.linspace(0, cfg.total_energy, 10_001)[1:-1]
    vals = np.array([pf.nu([g], [1.0], cfg) for g in grid])
    assert res.nu >= vals.max() - 1e-12
    assert abs(res.p[0] - grid[vals.argmax()]) <= 2 * (grid[1] - grid[0])


def test_boost_coordinate_direction_support():
    res = pf.maximize_nu_boost([1.0, 0.0], CFG)
    assert res.p[1] == 0.0 and res.q[1] == 0.0 and res.s[1] == 0.0
    assert res.p[0] > 0 and res.q[0] > 0


def test_boost_matches_grid_reference_config():
    e = np.array([0.5, 0.5])
    res = pf.maximize_nu_boost(e, CFG)
    g = np.linspace(0, CFG.total_energy, 202)[1:-1]
    best = 0.0
    for a in g:
        for b in g[g < CFG.total_energy - a]:
            best = max(best, pf.nu([a, b], e, CFG))
    assert res.nu >= best * (1 - 1e-12)
    assert abs(res.nu - best) <= 1e-4 * best
    assert np.allclose(res.s, res.nu * e, atol=1e-8)


def test_fixed_budget_examples():
    p = pf.closed_form_pilots([0.5, 0.5], [0.5, 0.5], 3.0, 4.0)
    assert np.allclose(p, [1.5, 1.5])
    p = pf.closed_form_pilots([0.5, 0.5], REF_EIGS, 1.0, 8.0)
    assert np.allclose(p, [0.3965, 0.6035], atol=5e-5)
    assert np.isclose(p.sum(), 1.0, rtol=1e-15)


def test_closed_form_vs_numeric_100(rng):
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 5))
        r = np.sort(rng.uniform(0.1, 2.0, n))[::-1]
        e = rng.dirichlet(np.ones(n))
        mu_p, mu_q = rng.uniform(0.1, 20, 2)
        a = pf.closed_form_pilots(e, r, mu_p, mu_q)
        b = pf.minimize_nu_bar_reciprocal(e, r, mu_p, mu_q)
        worst = max(worst, np.abs(a - b).max() / mu_p)
    assert worst <= 1e-6


def test_fixed_budgets_ray_result():
    e = np.array([0.3, 0.7])
    res = pf.maximize_nu_fixed_budgets(e, 4.0, 6.0, CFG)
    assert np.isclose(res.p.sum(), 4.0, rtol=1e-12)
    assert np.isclose(res.q.sum(), 6.0, rtol=1e-12)
    assert np.allclose(res.s, res.nu * e, atol=1e-8)
    assert np.allclose(snr_profile_vec(res.p, res.q, CFG.r), res.s, atol=1e-12)


def test_sample_border_single_direction():
    out = pf.sample_border(1, 'boost', CFG)
    assert len(out) == 1 and out[0].s[1] == 0.0


@pytest.mark.parametrize('mode', ['boost', 'fixed_budgets'])
def test_border_full_power_and_non_domination(mode):
    budgets = (20.0, 10.0) if mode == 'fixed_budgets' else None
    pts = pf.sample_border(64, mode, CFG, budgets)
    assert len(pts) == 64
    for a in pts:
        if mode == 'boost':
            used = a.p.sum() + CFG.data_slots * a.q.sum()
            assert abs(used - CFG.total_energy) <= 1e-8 * CFG.total_energy
        else:
            assert abs(a.p.sum() - 20.0) <= 1e-8 and abs(a.q.sum() - 10.0) <= 1e-8
        for b in pts:
            if a is not b:
                assert not pf.dominates(a.s, b.s, rel=1e-8)


def test_random_allocations_do_not_dominate_border(rng):
    pts = pf.sample_border(64, 'boost', CFG)
    S = np.array([b.s for b in pts])
    N = 10_000
    E = CFG.total_energy
    share = rng.uniform(0, 1, N)
    a = rng.uniform(0, 1, N)
    c = rng.uniform(0, 1, N)
    p = np.column_stack([a, 1 - a]) * (share * E)[:, None]
    q = np.column_stack([c, 1 - c]) * ((1 - share) * E / CFG.data_slots)[:, None]
    r = CFG.r
    rt = r / (1 + r * p)
    s = (r - rt) * q / (1 + np.sum(q * rt, 1))[:, None]
    tol = 1e-6 * S.max(axis=1)
    dom = np.all(s[:, None, :] >= S[None] - tol[None, :, None], axis=2) & \
        np.any(s[:, None, :] > S[None] + tol[None, :, None], axis=2)
    assert not dom.any()


def test_border_directions_deterministic():
    a = pf.border_directions(20, 3)
    b = pf.border_directions(20, 3)
    assert np.array_equal(a, b)
    assert np.allclose(a[:3], np.eye(3))
    assert np.allclose(a.sum(1), 1.0) and np.all(a >= 0)


def test_threads_do_not_change_border():
    a = pf.sample_border(16, 'boost', CFG, threads=1)
    b = pf.sample_border(16, 'boost', CFG, threads=4)
    for x, y in zip(a, b):
        assert np.array_equal(x.s, y.s)
