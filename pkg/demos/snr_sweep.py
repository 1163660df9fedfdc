"""
Rate of the joint design against the two baselines over SNR.

The joint design picks the training length too. "precoder only" keeps
uniform pilots, "none" keeps uniform pilots and a uniform precoder.
Rates are in bits per channel use, time weighted, on fresh draws.

    python3 demos/snr_sweep.py --samples 20000
"""

import argparse

import numpy as np

from trainprecode import joint_optimizer as jo
from trainprecode.channel_model import SystemConfig
from trainprecode.utilities import UtilitySpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    ap.add_argument('--samples', type=int, default=10_000)
    ap.add_argument('--seed', type=int, default=0)
    args = ap.parse_args()

    base_cfg = SystemConfig(2, 2, 10, 2, 1.0, [2 / 3, 1 / 3])
    spec = UtilitySpec('mutual_info', n_rx=2, mc_samples=args.samples,
                       master_seed=args.seed)
    bits = 1 / np.log(2)
    print(' SNR   joint   prec.  none   T_tau')
    for db in range(-10, 31, 5):
        cfg = base_cfg.with_power(10 ** (db / 10))
        joint = jo.run_full_fledged(cfg, spec)
        base = jo.baseline_config(cfg)
        pre = jo.run_precoder_only(base, spec)
        none = jo.run_none(base, spec)
        rates = [r.weight * r.utility_fresh * bits for r in (joint, pre, none)]
        print(f'{db:+4d}  ' + '  '.join(f'{v:6.3f}' for v in rates)
              + f'   {joint.t_tau_star}')


if __name__ == '__main__':
    main()
