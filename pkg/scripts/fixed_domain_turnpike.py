"""Gap |J^T(Omega) - J^s(Omega)| against T for a few fixed shapes of the standard fixture.

    python scripts/fixed_domain_turnpike.py [--config configs/standard.ini] [--masks 5]
"""
import argparse

import numpy as np

from turnpike.config import load_config
from turnpike.costs import elliptic_cost, parabolic_cost
from turnpike.domain import DomainMask
from turnpike.experiments import fit_rate
from turnpike.optimizer import random_admissible_mask

HORIZONS = (1, 2, 4, 8, 16, 32, 64)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument('--config', default='configs/standard.ini')
    ap.add_argument('--masks', type=int, default=5)
    ap.add_argument('--seed', type=int, default=0)
    args = ap.parse_args()

    cfg = load_config(args.config)
    grid = cfg.grid()
    cls = cfg.admissible_class(grid)
    target = cfg.target(grid, cls.omega)
    rng = np.random.default_rng(args.seed)
    masks = [('full', DomainMask.full_interior(grid))]
    masks += [(f'walk{k}', random_admissible_mask(cls, rng, int(rng.integers(50, 400))))
              for k in range(args.masks - 1)]

    print('mask    ' + ' '.join(f'{"T=" + str(T):>10}' for T in HORIZONS) + '   slope')
    for name, m in masks:
        J_s = elliptic_cost(m, target).value
        gaps = [abs(parabolic_cost(m, target, T).value - J_s) for T in HORIZONS]
        fit = fit_rate(list(zip(HORIZONS, gaps)))
        print(f'{name:8s}' + ' '.join(f'{g:10.3e}' for g in gaps) + f'   {fit.slope:.3f}')


if __name__ == '__main__':
    main()
