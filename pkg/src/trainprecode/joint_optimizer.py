"""
Alternating joint design of pilot and data eigenvalues.

Each cycle runs three steps in the channel eigenbasis:

(a) best pilots for the current data eigenvalues, same pilot energy,
(b) best data eigenvalues for the new pilots, same data energy,
(c) push the resulting profile out along its own direction to the border
    of the reachable set, which may move energy between pilots and data.

All three steps start from the incumbent and never lower the frozen-sample
utility. Pilots can only occupy ``T_tau`` modes (the pilot Gram has rank at
most ``T_tau``), so with ``T_tau < N_T`` everything lives on the strongest
``T_tau`` channel modes.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import utilities
from .channel_model import SystemConfig, derive_seed, snr_profile_vec
from .hermitian_kernels import numeric_rank
from .pareto_frontier import (max_threads, maximize_nu_boost,
                              maximize_nu_fixed_budgets)
from .pilot_stage import optimize_pilot_aligned
from .precoder_stage import optimize_precoder_aligned

__all__ = ['IterationRecord', 'IterationTrace', 'JointResult', 'RATE_KINDS',
           'time_weight', 'fresh_spec', 'uniform_start', 'run_boost',
           'run_fixed_budgets', 'run_full_fledged', 'run_none',
           'run_precoder_only', 'baseline_config']

# utilities measured in nats per channel use, which pay for training time
RATE_KINDS = ('mutual_info', 'minkowski_lower', 'jensen_upper_1',
              'jensen_upper_2', 'expected_logdet')

MOVE_TOL = 1e-6
PLATEAU_CYCLES = 5
# a plateau cycle whose step is at least this share of the previous step is
# not contracting towards a fixed point
NO_CONTRACTION = 0.9
INNER_FTOL = 1e-12


@dataclass
class IterationRecord:
    p: np.ndarray
    q: np.ndarray
    s: np.ndarray
    utility: float
    std_error: float


@dataclass
class IterationTrace:
    iterations: List[IterationRecord] = field(default_factory=list)
    # frozen-sample utility after every single step, (a), (b), (c) per cycle
    steps: List[float] = field(default_factory=list)
    converged: bool = False
    cycle_detected: bool = False

    @property
    def utilities(self) -> np.ndarray:
        return np.array([it.utility for it in self.iterations])


@dataclass
class JointResult:
    p_star: np.ndarray
    q_star: np.ndarray
    t_tau_star: int
    utility: float
    std_error: float
    trace: IterationTrace
    rank_star: int
    mode: str = 'boost'
    utility_fresh: float = np.nan
    se_fresh: float = np.nan
    weight: float = 1.0
    per_tau: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.trace.converged

    @property
    def cycle_detected(self) -> bool:
        return self.trace.cycle_detected

    @property
    def s_star(self) -> np.ndarray:
        return self.trace.iterations[-1].s if self.trace.iterations \
            else np.zeros_like(self.p_star)

    @property
    def weighted_utility(self) -> float:
        return self.weight * self.utility

    @property
    def weighted_fresh(self) -> float:
        return self.weight * self.utility_fresh


def time_weight(kind: str, cfg: SystemConfig) -> float:
    """Share ``(T - T_tau) / T`` of the block left for data, rates only."""
    if kind in RATE_KINDS:
        return cfg.data_slots / cfg.coherence_time
    return 1.0


def fresh_spec(spec: utilities.UtilitySpec) -> utilities.UtilitySpec:
    """Same utility on an independent sample set, for honest re-evaluation."""
    seed = int(derive_seed(spec.master_seed, 0xFFFFFFFF))
    return spec.replace(master_seed=seed & 0x7FFFFFFFFFFFFFFF)


class _Embedded:
    """Objective on the leading `k` modes of an `n`-mode profile."""

    def __init__(self, obj, n, k):
        self.obj, self.n, self.k = obj, n, k

    def _pad(self, s):
        full = np.zeros(self.n)
        full[:self.k] = s
        return full

    def value(self, s):
        return self.obj.value(self._pad(s))

    def grad(self, s):
        return self.obj.grad(self._pad(s))[:self.k]


def _active(cfg: SystemConfig) -> int:
    return min(cfg.training_duration, cfg.n_tx)


def _sub_config(cfg: SystemConfig, k: int) -> SystemConfig:
    return SystemConfig(n_tx=k, n_rx=cfg.n_rx,
                        coherence_time=cfg.coherence_time,
                        training_duration=cfg.training_duration,
                        power=cfg.power, channel_eigs=cfg.r[:k])


def _pad(x, n):
    out = np.zeros(n)
    out[:len(x)] = x
    return out


def uniform_start(cfg: SystemConfig, mu_p=None, mu_q=None):
    """
    Uniform pilot and data eigenvalues on the usable modes.

    Defaults spend the full block energy: pilots ``T_tau mu`` in total,
    data ``mu`` per data slot.
    """
    k = _active(cfg)
    mu_p = cfg.training_duration * cfg.power if mu_p is None else mu_p
    mu_q = cfg.power if mu_q is None else mu_q
    p = np.zeros(cfg.n_tx)
    q = np.zeros(cfg.n_tx)
    p[:k] = mu_p / k
    q[:k] = mu_q / k
    return p, q


def _finish(cfg, spec, p, q, trace, mode):
    obj_val = utilities.evaluate(spec, snr_profile_vec(p, q, cfg.r))
    fresh = utilities.evaluate(fresh_spec(spec), snr_profile_vec(p, q, cfg.r))
    rank = numeric_rank(p)
    return JointResult(p_star=p, q_star=q, t_tau_star=cfg.training_duration,
                       utility=obj_val.value, std_error=obj_val.std_error,
                       trace=trace, rank_star=rank, mode=mode,
                       utility_fresh=fresh.value, se_fresh=fresh.std_error,
                       weight=time_weight(spec.kind, cfg))


def _directions(s, faces):
    """
    Normalized `s`, then (with `faces`) `s` restricted to its ``k`` largest
    entries for every smaller support size ``k``.
    """
    if not np.any(s > 0):
        return []
    out = [s / s.sum()]
    if faces:
        order = np.argsort(-s, kind='stable')
        for k in range(np.count_nonzero(s > 0) - 1, 0, -1):
            e = np.zeros_like(s)
            e[order[:k]] = s[order[:k]]
            out.append(e / e.sum())
    return out


def _alternate(cfg, spec, eps, max_iters, reproject, p0, q0, mode, faces):
    n = cfg.n_tx
    k = _active(cfg)
    r = cfg.r[:k]
    full = utilities.Objective(spec)
    obj = _Embedded(full, n, k)

    def record(p, q):
        s = snr_profile_vec(p, q, r)
        v = full.full(_pad(s, n))
        trace.iterations.append(IterationRecord(
            _pad(p, n), _pad(q, n), _pad(s, n), v.value, v.std_error))
        return v.value

    trace = IterationTrace()
    p = np.asarray(p0, dtype=float)[:k].copy()
    q = np.asarray(q0, dtype=float)[:k].copy()
    best = record(p, q)
    trace.steps.append(best)
    plateau = 0
    last_move = np.inf
    for _ in range(max_iters):
        # (a) pilots for fixed data, incumbent pilot energy
        p1, _, va = optimize_pilot_aligned(q, r, p.sum(), obj, p0=p,
                                           ftol=INNER_FTOL)
        if va < trace.steps[-1]:
            p1, va = p, trace.steps[-1]
        trace.steps.append(va)
        # (b) data for fixed pilots, incumbent data energy
        q1, s1, vb = optimize_precoder_aligned(p1, r, q.sum(), obj, q0=q,
                                               ftol=INNER_FTOL)
        if vb < va:
            q1, vb = q, va
            s1 = snr_profile_vec(p1, q1, r)
        trace.steps.append(vb)
        # (c) border along the direction reached, and optionally along the
        # same direction cut down to its strongest modes
        p2, q2, vc = p1, q1, vb
        for e in _directions(s1, faces):
            cand_p, cand_q = reproject(e, p1)
            vcand = obj.value(snr_profile_vec(cand_p, cand_q, r))
            if vcand >= vc:
                p2, q2, vc = cand_p, cand_q, vcand
        trace.steps.append(vc)

        move = np.linalg.norm(np.r_[p2 - p, q2 - q]) / \
            (1.0 + np.linalg.norm(np.r_[p, q]))
        gain = vc - best
        p, q = p2, q2
        best = max(best, vc)
        record(p, q)
        if gain <= eps:
            if move <= MOVE_TOL:
                trace.converged = True
                break
            # still moving: fine while the steps shrink, a cycle otherwise
            plateau = plateau + 1 if move >= NO_CONTRACTION * last_move else 0
            if plateau >= PLATEAU_CYCLES:
                trace.cycle_detected = True
                break
        else:
            plateau = 0
        last_move = move
    # the incumbent is always the best iterate since no step loses utility
    return _finish(cfg, spec, _pad(p, n), _pad(q, n), trace, mode)


def run_boost(cfg: SystemConfig, spec: utilities.UtilitySpec, eps=1e-6,
              max_iters=500, p0=None, q0=None, faces=True) -> JointResult:
    """
    Joint design when pilots and data draw on one energy budget ``T mu``.

    Parameters
    ----------
    cfg : SystemConfig
    spec : UtilitySpec
        Utility to maximize. Monte Carlo kinds use one frozen sample set.
    eps : float
        Stop once a full cycle gains at most `eps` (nats for rates).
    max_iters : int
        Cycle cap.
    p0, q0 : array_like, optional
        Start; defaults to `uniform_start`.
    faces : bool
        Also try the border on the faces where the weakest modes are
        switched off. The reachable set is not convex under a shared budget
        and its border along a direction does not tend to the single-mode
        border point as the other entries vanish, so the plain iteration can
        stall at a multi-stream point that a fewer-stream allocation beats.
    """
    if eps <= 0:
        raise ValueError('eps must be positive')
    k = _active(cfg)
    sub = _sub_config(cfg, k)
    if p0 is None or q0 is None:
        p0, q0 = uniform_start(cfg)

    def reproject(e, p_start):
        ray = maximize_nu_boost(e, sub, p0=p_start)
        return ray.p, ray.q

    return _alternate(cfg, spec, eps, max_iters, reproject, p0, q0, 'boost',
                      faces)


def run_fixed_budgets(cfg: SystemConfig, spec: utilities.UtilitySpec, mu_p,
                      mu_q, eps=1e-6, max_iters=500,
                      faces=True) -> JointResult:
    """
    Joint design with separate budgets ``sum(p) = mu_p``, ``sum(q) = mu_q``.

    The border step uses the closed-form pilot split. `faces` as in
    `run_boost`.
    """
    if eps <= 0:
        raise ValueError('eps must be positive')
    if mu_p <= 0 or mu_q <= 0:
        raise ValueError('budgets must be positive')
    k = _active(cfg)
    sub = _sub_config(cfg, k)
    p0, q0 = uniform_start(cfg, mu_p, mu_q)

    def reproject(e, _):
        ray = maximize_nu_fixed_budgets(e, mu_p, mu_q, sub)
        return ray.p, ray.q

    return _alternate(cfg, spec, eps, max_iters, reproject, p0, q0,
                      'fixed_budgets', faces)


def run_full_fledged(cfg: SystemConfig, spec: utilities.UtilitySpec,
                     eps=1e-6, max_iters=500, threads=None,
                     faces=True) -> JointResult:
    """
    Joint design including the training duration.

    Runs `run_boost` for every ``T_tau`` in ``1..min(T-1, N_T)`` and keeps
    the best after weighting rates by the data share ``(T - T_tau)/T``.
    The training duration of `cfg` is ignored. ``per_tau`` of the result
    holds every branch.
    """
    taus = list(range(1, min(cfg.coherence_time - 1, cfg.n_tx) + 1))

    def job(tt):
        return run_boost(cfg.with_training(tt), spec, eps, max_iters,
                         faces=faces)

    workers = min(threads or max_threads(), len(taus))
    if workers <= 1:
        results = [job(tt) for tt in taus]
    else:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(job, taus))
    # ties go to the shorter training
    best = max(results, key=lambda res: (res.weighted_utility,
                                         -res.t_tau_star))
    best.per_tau = {res.t_tau_star: res for res in results}
    best.mode = 'full_fledged'
    return best


def baseline_config(cfg: SystemConfig) -> SystemConfig:
    """Training as long as the pilot rank allows, ``min(N_T, T - 1)``."""
    return cfg.with_training(min(cfg.n_tx, cfg.coherence_time - 1))


def run_none(cfg: SystemConfig, spec: utilities.UtilitySpec) -> JointResult:
    """No optimization: uniform pilots and data at full energy."""
    p, q = uniform_start(cfg)
    trace = IterationTrace(converged=True)
    s = snr_profile_vec(p, q, cfg.r)
    v = utilities.evaluate(spec, s)
    trace.iterations.append(IterationRecord(p, q, s, v.value, v.std_error))
    trace.steps.append(v.value)
    return _finish(cfg, spec, p, q, trace, 'none')


def run_precoder_only(cfg: SystemConfig,
                      spec: utilities.UtilitySpec) -> JointResult:
    """Uniform pilots, data eigenvalues optimized for them."""
    p, q0 = uniform_start(cfg)
    k = _active(cfg)
    obj = _Embedded(utilities.Objective(spec), cfg.n_tx, k)
    q, s, _ = optimize_precoder_aligned(p[:k], cfg.r[:k], q0.sum(), obj,
                                        q0=q0[:k], ftol=INNER_FTOL)
    q = _pad(q, cfg.n_tx)
    trace = IterationTrace(converged=True)
    s = snr_profile_vec(p, q, cfg.r)
    v = utilities.evaluate(spec, s)
    trace.iterations.append(IterationRecord(p, q, s, v.value, v.std_error))
    trace.steps.append(v.value)
    return _finish(cfg, spec, p, q, trace, 'precoder_only')
