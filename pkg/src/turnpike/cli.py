"""Command-line entry point: ``turnpike {solve,optimize,sweep,gamma-probe}``.

Exit status 0 on success, 2 for usage and configuration errors, 3 when a
numerical routine fails. ``TURNPIKE_LOG`` (debug, info, warning, error)
sets the log level.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import List, Optional

from turnpike import __version__
from turnpike.config import RunConfig, load_config, load_sweep_config
from turnpike.costs import EllipticCost, ParabolicCost
from turnpike.domain import count_complement_components
from turnpike.errors import (ConfigError, ConvergenceError, EmptySetError, GridMismatchError,
                             InadmissiblePerturbationError, InfeasibleInitError, InvalidMaskError,
                             SolverDivergenceError)
from turnpike.experiments import gamma_convergence_probe, run_sweep, shrinking_hole_schedule
from turnpike.optimizer import optimize, polish_with_cost
from turnpike.pde_core import solve_heat, solve_poisson

log = logging.getLogger('turnpike')

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

USAGE_ERRORS = (ConfigError, InfeasibleInitError, InvalidMaskError, GridMismatchError,
                InadmissiblePerturbationError, EmptySetError, FileNotFoundError)
NUMERIC_ERRORS = (SolverDivergenceError, ConvergenceError, ArithmeticError)


class UsageError(Exception):
    pass


def _default_jobs() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def _prepare_out(path: str, force: bool) -> Path:
    out = Path(path)
    if out.exists() and not out.is_dir():
        raise UsageError(f'output path exists and is not a directory: {out}')
    if out.is_dir() and any(out.iterdir()) and not force:
        raise UsageError(f'output directory {out} is not empty (use --force to write into it)')
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=1) + '\n')


def _load(args) -> RunConfig:
    return load_config(args.config, args.seed)


# -- subcommands -----------------------------------------------------------

def cmd_solve(args) -> int:
    cfg = _load(args)
    grid = cfg.grid()
    mask = cfg.mask('solve', 'mask', grid)
    f = cfg.field('f', grid)
    equation = cfg.get('solve', 'equation', 'poisson')
    out = _prepare_out(args.out, args.force)
    start = time.perf_counter()
    stats = {'equation': equation, 'n_active': mask.n_active, 'n_components': count_complement_components(mask)}
    if equation == 'poisson':
        u = solve_poisson(mask, f)
    elif equation == 'heat':
        y0 = cfg.field('y0', grid)
        T = cfg.number('solve', 'T')
        dt = cfg.number('solve', 'dt') if cfg.has('solve', 'dt') else None
        stride = cfg.number('solve', 'stride', '0', kind=int)
        if T <= 0:
            raise ConfigError(f'[solve] T must be positive, got {T}')
        traj = solve_heat(mask, f, y0, T, dt, stride if stride > 0 else 10 ** 9)
        u = traj.final
        stats.update({'T': T, 'dt': traj.dt, 'steps': int(round(T / traj.dt))})
        if stride > 0:
            tdir = out / 'trajectory'
            tdir.mkdir(exist_ok=True)
            for k, (t, state) in enumerate(zip(traj.times, traj.states)):
                (tdir / f'state_{k:05d}.csv').write_text(state.to_csv())
            _write_json(tdir / 'times.json', [float(t) for t in traj.times])
    else:
        raise ConfigError(f'[solve] equation must be poisson or heat, got {equation!r}')
    stats.update({'max': float(u.values.max()), 'min': float(u.values.min()),
                  'l2_norm': u.l2_norm(), 'h1_norm': u.h1_norm(),
                  'wall_time': time.perf_counter() - start})
    (out / 'solution.csv').write_text(u.to_csv())
    (out / 'solution.json').write_text(u.to_json())
    _write_json(out / 'stats.json', stats)
    print(f'{equation}: max {stats["max"]:.6g}, L2 norm {stats["l2_norm"]:.6g} -> {out}')
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = _load(args)
    grid = cfg.grid()
    cls = cfg.admissible_class(grid)
    target = cfg.target(grid, cls.omega)
    init = cfg.mask('optimize', 'init', grid, default='full')
    schedule = cfg.schedule('anneal')
    problem = cfg.get('optimize', 'problem', 'elliptic')
    if problem == 'elliptic':
        cost_fn = EllipticCost(target)
    elif problem == 'parabolic':
        cost_fn = ParabolicCost(target, cfg.number('optimize', 'horizon'))
    else:
        raise ConfigError(f'[optimize] problem must be elliptic or parabolic, got {problem!r}')
    out = _prepare_out(args.out, args.force)
    with open(out / 'trace.csv', 'w', newline='') as fh:
        best, trace = optimize(cost_fn, cls, init, schedule, trace_file=fh)
    result = {'problem': problem, 'initial_cost': trace.initial_cost, 'best_cost': trace.best_cost,
              'evaluations': trace.evaluations, 'wall_time': trace.wall_time}
    if cfg.flag('optimize', 'polish', 'false'):
        best, cost, evals = polish_with_cost(cost_fn, cls, best, trace.best_cost)
        result.update({'polished_cost': cost, 'polish_evaluations': evals})
    result['final_cost'] = result.get('polished_cost', trace.best_cost)
    (out / 'best_mask.txt').write_text(best.to_text())
    _write_json(out / 'result.json', result)
    _write_json(out / 'manifest.json', {
        'command': 'optimize', 'config_path': str(cfg.path), 'config': cfg.sections, 'seed': cfg.seed,
        'versions': {'turnpike': __version__}})
    print(f'{problem}: cost {trace.initial_cost:.6g} -> {result["final_cost"]:.6g} -> {out}')
    return EXIT_OK


def cmd_sweep(args) -> int:
    out = _prepare_out(args.out, args.force)
    config = load_sweep_config(args.config, args.seed, output_dir=str(out), jobs=args.jobs)
    report = run_sweep(config)
    if report.fit is None:
        print(f'warning: {len(report.rows)} horizon(s) swept; no rate fit (needs at least 4 positive gaps)',
              file=sys.stderr)
    else:
        print(f'slope {report.fit.slope:.6g}')
        print(f'C {report.fit.constant:.6g}')
        print(f'residual {report.fit.residual:.6g}')
    print(f'noise floor {report.noise_floor:.6g} -> {out}')
    return EXIT_OK


def cmd_gamma_probe(args) -> int:
    cfg = _load(args)
    grid = cfg.grid()
    base = cfg.mask('probe', 'base', grid, default='full')
    f = cfg.field('f', grid)
    try:
        corner = tuple(int(t) for t in cfg.get('probe', 'corner').split())
        sizes = [int(t) for t in cfg.get('probe', 'sizes').split()]
    except ValueError:
        raise ConfigError('[probe] corner and sizes must be integers') from None
    if len(corner) != 2:
        raise ConfigError('[probe] corner needs two integers: i j')
    cls = cfg.admissible_class(grid) if cfg.has('class') else None
    schedule = shrinking_hole_schedule(base, corner, sizes)
    try:
        table = gamma_convergence_probe(base, schedule, f, cls)
    except ValueError as exc:
        if isinstance(exc, USAGE_ERRORS):
            raise
        raise ConfigError(f'[probe] {exc}') from None
    out = _prepare_out(args.out, args.force)
    lines = ['size,dhc,h1_error']
    lines += [f'{k},{d!r},{e!r}' for k, (d, e) in zip(sizes, table.rows)]
    (out / 'probe.csv').write_text('\n'.join(lines) + '\n')
    print(f'nonincreasing {table.nonincreasing}, vanishes {table.vanishes} -> {out}')
    return EXIT_OK


COMMANDS = {'solve': cmd_solve, 'optimize': cmd_optimize, 'sweep': cmd_sweep, 'gamma-probe': cmd_gamma_probe}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='turnpike', description=__doc__.splitlines()[0])
    parser.add_argument('--version', action='version', version=__version__)
    sub = parser.add_subparsers(dest='command', required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument('--config', required=True, help='configuration file (sweep also takes a manifest.json)')
        p.add_argument('--out', required=True, help='output directory')
        p.add_argument('--seed', type=int, default=None, help='override the seed in the config')
        p.add_argument('--jobs', type=int, default=_default_jobs(), help='worker processes')
        p.add_argument('--force', action='store_true', help='write into a non-empty output directory')
    return parser


def _setup_logging():
    level = os.environ.get('TURNPIKE_LOG', 'warning').upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format='%(asctime)s %(name)s %(levelname)s %(message)s')


def main(argv: Optional[List[str]] = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print('error: --seed must be an unsigned 64-bit integer', file=sys.stderr)
        return EXIT_USAGE
    if args.jobs < 1:
        print('error: --jobs must be at least 1', file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, *USAGE_ERRORS) as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f'numerical failure: {exc}', file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == '__main__':
    sys.exit(main())
