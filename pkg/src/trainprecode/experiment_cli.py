"""
Command-line driver for the joint pilot/precoder experiments.

Usage::

    trainprecode optimize config.json --out results/
    trainprecode sweep config.json --seed 7
    trainprecode pareto config.json --dirs 64

Configs are JSON documents::

    {
      "system": {"n_tx": 2, "n_rx": 2, "coherence_time": 10,
                 "training_duration": 2, "power": 10,
                 "channel_eigs": [0.6667, 0.3333]},
      "utility": {"kind": "mutual_info", "mc_samples": 10000},
      "mode": "boost",
      "eps": 1e-6, "max_iters": 500, "seed": 0,
      "sweep": [-10, 0, 10],
      "output": "results"
    }

``power_db`` may replace ``power``. ``budgets`` (``{"mu_p": .., "mu_q": ..}``)
is required for ``fixed_budgets``. Exit status is 0 on convergence, 2 when
the iteration ended in a cycle and 1 on a bad config or command line.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import joint_optimizer as jo
from . import pareto_frontier as pf
from .channel_model import ConfigError, SystemConfig
from .utilities import KINDS, UtilitySpec

__all__ = ['ExperimentConfig', 'load_config', 'build_parser', 'main',
           'MODES', 'EXIT_OK', 'EXIT_CONFIG', 'EXIT_CYCLE']

MODES = ('boost', 'fixed_budgets', 'full_fledged', 'precoder_only', 'none')
EXIT_OK, EXIT_CONFIG, EXIT_CYCLE = 0, 1, 2
FMT = '%.12g'

_SYSTEM_KEYS = {'n_tx', 'n_rx', 'coherence_time', 'training_duration',
                'power', 'power_db', 'channel_eigs'}
_UTILITY_KEYS = {'kind', 'streams', 'mc_samples', 'master_seed', 'shift'}
_TOP_KEYS = {'system', 'utility', 'mode', 'budgets', 'eps', 'max_iters',
             'seed', 'sweep', 'output', 'faces', 'dirs'}


@dataclass
class ExperimentConfig:
    system: SystemConfig
    utility: UtilitySpec
    mode: str = 'boost'
    budgets: Optional[tuple] = None
    eps: float = 1e-6
    max_iters: int = 500
    seed: int = 0
    sweep: list = field(default_factory=list)
    output: str = '.'
    faces: bool = True
    dirs: int = 64


def _need(d, key, where):
    if key not in d:
        raise ConfigError(f'missing field {where}.{key}')
    return d[key]


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f'{where} must be an object')
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f'unknown field(s) in {where}: '
                          + ', '.join(sorted(extra)))


def _number(x, what):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f'{what} must be a number')
    if not math.isfinite(x):
        raise ConfigError(f'{what} must be finite')
    return x


def _integer(x, what):
    if isinstance(x, bool) or not isinstance(x, int):
        raise ConfigError(f'{what} must be an integer')
    return x


def config_from_dict(doc, seed=None, out=None) -> ExperimentConfig:
    """Validate a parsed JSON document; `seed` and `out` override it."""
    _check_keys(doc, _TOP_KEYS, 'config')
    sysd = _need(doc, 'system', 'config')
    _check_keys(sysd, _SYSTEM_KEYS, 'system')
    if ('power' in sysd) == ('power_db' in sysd):
        raise ConfigError('give exactly one of system.power, system.power_db')
    power = _number(sysd['power'], 'system.power') if 'power' in sysd \
        else 10.0 ** (_number(sysd['power_db'], 'system.power_db') / 10.0)
    eigs = _need(sysd, 'channel_eigs', 'system')
    if not isinstance(eigs, list) or not eigs:
        raise ConfigError('system.channel_eigs must be a non-empty list')
    eigs = [_number(v, 'system.channel_eigs entry') for v in eigs]
    n_tx = _integer(sysd.get('n_tx', len(eigs)), 'system.n_tx')
    T = _integer(_need(sysd, 'coherence_time', 'system'),
                 'system.coherence_time')
    # full_fledged ignores it, everything else defaults to the longest
    t_tau = sysd.get('training_duration', min(n_tx, max(T - 1, 1)))
    system = SystemConfig(
        n_tx=n_tx,
        n_rx=_integer(_need(sysd, 'n_rx', 'system'), 'system.n_rx'),
        coherence_time=T,
        training_duration=_integer(t_tau, 'system.training_duration'),
        power=float(power), channel_eigs=eigs)

    utd = doc.get('utility', {})
    _check_keys(utd, _UTILITY_KEYS, 'utility')
    kind = utd.get('kind', 'mutual_info')
    if kind not in KINDS:
        raise ConfigError(f'unknown utility kind {kind!r}')
    if seed is None:
        seed = doc.get('seed', utd.get('master_seed', 0))
    seed = _integer(seed, 'seed')
    if seed < 0:
        raise ConfigError('seed must be non-negative')
    try:
        utility = UtilitySpec(
            kind=kind, n_rx=system.n_rx, streams=utd.get('streams'),
            mc_samples=_integer(utd.get('mc_samples', 10_000),
                                'utility.mc_samples'),
            master_seed=seed,
            shift=float(_number(utd.get('shift', 1.0), 'utility.shift')))
    except ValueError as err:
        raise ConfigError(str(err)) from None
    if kind == 'mmse_bound' and utility.streams > system.n_tx:
        raise ConfigError('utility.streams exceeds the profile length')

    mode = doc.get('mode', 'boost')
    if mode not in MODES:
        raise ConfigError(f'mode must be one of {", ".join(MODES)}')
    budgets = None
    if 'budgets' in doc:
        b = doc['budgets']
        _check_keys(b, {'mu_p', 'mu_q'}, 'budgets')
        budgets = (float(_number(_need(b, 'mu_p', 'budgets'), 'mu_p')),
                   float(_number(_need(b, 'mu_q', 'budgets'), 'mu_q')))
        if min(budgets) <= 0:
            raise ConfigError('budgets must be positive')
    if mode == 'fixed_budgets' and budgets is None:
        raise ConfigError('mode fixed_budgets needs budgets.mu_p, mu_q')
    eps = float(_number(doc.get('eps', 1e-6), 'eps'))
    if eps <= 0:
        raise ConfigError('eps must be positive')
    max_iters = _integer(doc.get('max_iters', 500), 'max_iters')
    if max_iters < 1:
        raise ConfigError('max_iters must be positive')
    sweep = doc.get('sweep', [])
    if not isinstance(sweep, list):
        raise ConfigError('sweep must be a list of SNR values in dB')
    sweep = [float(_number(v, 'sweep entry')) for v in sweep]
    faces = doc.get('faces', True)
    if not isinstance(faces, bool):
        raise ConfigError('faces must be true or false')
    dirs = _integer(doc.get('dirs', 64), 'dirs')
    if out is None:
        out = doc.get('output', '.')
    if not isinstance(out, str) or not out:
        raise ConfigError('output must be a directory path')
    return ExperimentConfig(system, utility, mode, budgets, eps, max_iters,
                            seed, sweep, out, faces, dirs)


def load_config(path, seed=None, out=None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as err:
        raise ConfigError(f'cannot read {path}: {err.strerror}') from None
    except json.JSONDecodeError as err:
        raise ConfigError(f'{path} is not valid JSON: {err}') from None
    return config_from_dict(doc, seed=seed, out=out)


# output -------------------------------------------------------------------

def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return FMT % float(x)


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator='\n')
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _write_all(outdir, files):
    """Write every file or none: temporaries first, renames last."""
    os.makedirs(outdir, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=outdir, prefix=f'.{name}.')
            with os.fdopen(fd, 'w', newline='') as fh:
                fh.write(text)
            staged.append((tmp, os.path.join(outdir, name)))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, dest in staged:
        os.replace(tmp, dest)


def _cols(prefix, n):
    return [f'{prefix}_{i + 1}' for i in range(n)]


# commands -----------------------------------------------------------------

def _run_mode(cfg: ExperimentConfig, system=None):
    system = system or cfg.system
    spec = cfg.utility
    if cfg.mode == 'boost':
        return jo.run_boost(system, spec, cfg.eps, cfg.max_iters,
                            faces=cfg.faces)
    if cfg.mode == 'fixed_budgets':
        return jo.run_fixed_budgets(system, spec, *cfg.budgets, cfg.eps,
                                    cfg.max_iters, faces=cfg.faces)
    if cfg.mode == 'full_fledged':
        return jo.run_full_fledged(system, spec, cfg.eps, cfg.max_iters,
                                   faces=cfg.faces)
    if cfg.mode == 'precoder_only':
        return jo.run_precoder_only(system, spec)
    return jo.run_none(system, spec)


def _result_rows(res):
    branches = res.per_tau or {res.t_tau_star: res}
    for tt in sorted(branches):
        b = branches[tt]
        yield ([res.mode, tt, int(tt == res.t_tau_star), b.utility,
                b.std_error, b.utility_fresh, b.se_fresh, b.weighted_utility,
                b.rank_star, b.converged, b.cycle_detected,
                len(b.trace.iterations) - 1]
               + list(b.p_star) + list(b.q_star) + list(b.s_star))


def cmd_optimize(cfg: ExperimentConfig) -> int:
    res = _run_mode(cfg)
    n = cfg.system.n_tx
    trace_rows = [[i, it.utility, it.std_error] + list(it.p) + list(it.q)
                  + list(it.s) for i, it in enumerate(res.trace.iterations)]
    head = ['iter', 'utility', 'std_error'] + _cols('p', n) + _cols('q', n) \
        + _cols('s', n)
    rhead = ['mode', 't_tau', 'selected', 'utility', 'std_error',
             'utility_fresh', 'se_fresh', 'weighted_utility', 'rank',
             'converged', 'cycle_detected', 'iterations'] \
        + _cols('p', n) + _cols('q', n) + _cols('s', n)
    _write_all(cfg.output, {'trace.csv': _table(head, trace_rows),
                            'result.csv': _table(rhead, _result_rows(res))})
    if res.cycle_detected:
        print('iteration entered a cycle; best iterate written',
              file=sys.stderr)
        return EXIT_CYCLE
    if not res.converged:
        print(f'no convergence within {cfg.max_iters} cycles',
              file=sys.stderr)
    return EXIT_OK


def _sweep_point(cfg: ExperimentConfig, db: float):
    system = cfg.system.with_power(10.0 ** (db / 10.0))
    joint_mode = cfg.mode if cfg.mode in ('boost', 'fixed_budgets',
                                          'full_fledged') else 'full_fledged'
    joint = _run_mode(ExperimentConfig(**{**cfg.__dict__,
                                          'mode': joint_mode}), system)
    base = jo.baseline_config(system)
    pre = jo.run_precoder_only(base, cfg.utility)
    none = jo.run_none(base, cfg.utility)
    # all three re-evaluated on the same fresh draws
    rate = cfg.utility.kind in jo.RATE_KINDS
    scale = 1.0 / math.log(2.0) if cfg.utility.kind == 'mutual_info' else 1.0
    vals, ses = [], []
    for res in (joint, pre, none):
        w = res.weight if rate else 1.0
        vals.append(w * scale * res.utility_fresh)
        ses.append(w * scale * res.se_fresh)
    flag = joint.cycle_detected
    return [db] + vals + ses, flag


def cmd_sweep(cfg: ExperimentConfig) -> int:
    if not cfg.sweep:
        raise ConfigError('sweep needs a non-empty list of SNR values')
    points = sorted(cfg.sweep)
    workers = min(pf.max_threads(), len(points))
    if workers <= 1:
        out = [_sweep_point(cfg, db) for db in points]
    else:
        with ThreadPoolExecutor(workers) as ex:
            out = list(ex.map(lambda db: _sweep_point(cfg, db), points))
    head = ['snr_db', 'rate_joint', 'rate_precoder_only', 'rate_none',
            'se_joint', 'se_precoder', 'se_none']
    _write_all(cfg.output, {'sweep.csv': _table(head, [r for r, _ in out])})
    return EXIT_CYCLE if any(f for _, f in out) else EXIT_OK


def cmd_pareto(cfg: ExperimentConfig, n_dirs: int) -> int:
    if n_dirs < 1:
        raise ConfigError('--dirs must be positive')
    if cfg.mode == 'fixed_budgets':
        rays = pf.sample_border(n_dirs, 'fixed_budgets', cfg.system,
                                cfg.budgets)
    else:
        rays = pf.sample_border(n_dirs, 'boost', cfg.system)
    n = cfg.system.n_tx
    rows = [list(r.e) + [r.nu] + list(r.p) + list(r.q) + list(r.s)
            for r in rays]
    head = _cols('e', n) + ['nu'] + _cols('p', n) + _cols('q', n) \
        + _cols('s', n)
    _write_all(cfg.output, {'border.csv': _table(head, rows)})
    return EXIT_OK


# parser -------------------------------------------------------------------

def _global_options(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument('--seed', type=int, default=default,
                        help='master seed of the channel draws')
    parser.add_argument('--out', default=default,
                        help='output directory (overrides the config)')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='trainprecode',
        description='Joint pilot and precoder design under statistical '
                    'channel knowledge.')
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest='command', required=True)
    p = sub.add_parser('optimize', help='run one joint design')
    p.add_argument('config')
    _global_options(p, suppress=True)
    p = sub.add_parser('sweep', help='joint vs baselines over SNR')
    p.add_argument('config')
    _global_options(p, suppress=True)
    p = sub.add_parser('pareto', help='sample the border of reachable SNRs')
    p.add_argument('config')
    p.add_argument('--dirs', type=int, default=None,
                   help='number of directions (default: config or 64)')
    _global_options(p, suppress=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which is reserved for cycles
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if args.seed is not None and args.seed < 0:
        print('error: --seed must be non-negative', file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out)
        if args.command == 'optimize':
            return cmd_optimize(cfg)
        if args.command == 'sweep':
            return cmd_sweep(cfg)
        dirs = args.dirs if args.dirs is not None else cfg.dirs
        return cmd_pareto(cfg, dirs)
    except ConfigError as err:
        print(f'error: {err}', file=sys.stderr)
        return EXIT_CONFIG


if __name__ == '__main__':
    sys.exit(main())
