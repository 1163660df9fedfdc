"""
Sample the border of reachable effective SNR profiles.

Compares the border when the pilot/data split is free with the border
for fixed per-slot budgets, and checks that random full-energy
allocations never beat the free border.

    python3 demos/pareto_border.py --dirs 16
"""

import argparse

import numpy as np

from trainprecode import pareto_frontier as pf
from trainprecode.channel_model import SystemConfig, snr_profile_vec


def main():
    ap = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    ap.add_argument('--dirs', type=int, default=16)
    ap.add_argument('--random', type=int, default=2000)
    args = ap.parse_args()

    cfg = SystemConfig(2, 2, 10, 2, 10.0, [2 / 3, 1 / 3])
    free = pf.sample_border(args.dirs, 'boost', cfg)
    fixed = pf.sample_border(args.dirs, 'fixed_budgets', cfg, (36.0, 8.0))
    print('   e_1    free s            fixed s')
    for a, b in zip(free, fixed):
        print(f'{a.e[0]:6.3f}  {np.round(a.s, 4)}  {np.round(b.s, 4)}')

    rng = np.random.default_rng(1)
    E = cfg.total_energy
    border = np.array([r.s for r in free])
    beaten = 0
    for _ in range(args.random):
        share, a, c = rng.uniform(size=3)
        p = np.array([a, 1 - a]) * share * E
        q = np.array([c, 1 - c]) * (1 - share) * E / cfg.data_slots
        s = snr_profile_vec(p, q, cfg.r)
        beaten += np.any(np.all(s > border * (1 + 1e-9), axis=1))
    print(f'\nrandom allocations beating the free border: {beaten}/{args.random}')


if __name__ == '__main__':
    main()
