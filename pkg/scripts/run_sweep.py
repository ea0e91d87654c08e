"""Run the long-horizon sweep on a config and print the table and rate fits.

    python scripts/run_sweep.py configs/standard.ini --out runs/standard
"""
import argparse
import time

from turnpike.config import load_sweep_config
from turnpike.experiments import quasi_optimality, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument('config')
    ap.add_argument('--out', required=True)
    ap.add_argument('--seed', type=int, default=None)
    ap.add_argument('--jobs', type=int, default=1)
    args = ap.parse_args()

    start = time.perf_counter()
    report = run_sweep(load_sweep_config(args.config, args.seed, args.out, args.jobs))
    h = report.omega_s.grid.h
    print(f'{"T":>6} {"J_T":>12} {"gap":>12} {"quasi_gap":>12} {"dHc/h":>7} {"to set/h":>8}')
    for r in report.rows:
        print(f'{r.T:6g} {r.J_T:12.4e} {r.gap:12.4e} {r.quasi_gap:12.4e} {r.dhc / h:7.2f} '
              f'{r.dhc_to_elliptic_set / h:8.2f}')
    print(f'J_s = {report.rows[0].J_s:.4e}, noise floor = {report.noise_floor:.2e}')
    if report.fit:
        print(f'gap fit: slope {report.fit.slope:.3f}, C {report.fit.constant:.3e}, residual {report.fit.residual:.3f}')
    q = quasi_optimality(report)
    if q.fit:
        print(f'quasi-gap fit: slope {q.fit.slope:.3f} on {q.fit.n_points} points')
    print(f'{time.perf_counter() - start:.0f}s, outputs in {args.out}')


if __name__ == '__main__':
    main()
