"""Long-horizon sweep: optimal shapes of the heat problem against the stationary one.

``run_sweep`` anneals the stationary problem once per restart, then the
time-averaged problem for every horizon and restart, and records optimal
values, cross-evaluations and complementary Hausdorff distances per horizon.
"""
from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import io
import json
import logging
import math
import platform
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy

from turnpike import __version__
from turnpike.costs import EllipticCost, ParabolicCost, TrackingTarget
from turnpike.domain import AdmissibleClass, DomainMask, complementary_hausdorff, is_admissible
from turnpike.errors import InadmissiblePerturbationError, InsufficientPointsError
from turnpike.fields import ScalarField
from turnpike.optimizer import AnnealSchedule, optimize, polish_with_cost, random_admissible_mask
from turnpike.pde_core import solve_poisson

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ('T', 'J_T', 'J_s', 'gap', 'dhc', 'J_T_of_Omega_s', 'quasi_gap',
                 'J_s_of_Omega_T', 'dhc_to_elliptic_set', 'seeds')

_STAGE_INIT, _STAGE_ELLIPTIC = 0, 1


@dataclasses.dataclass
class RateFit:
    slope: float
    intercept: float
    residual: float
    n_points: int
    n_excluded: int = 0

    @property
    def constant(self) -> float:
        return math.exp(self.intercept)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d['constant'] = self.constant
        return d


def fit_rate(points: Sequence[Tuple[float, float]], min_points: int = 4) -> RateFit:
    """Least-squares line through ``(log T, log gap)``.

    Zero gaps are dropped and counted in ``n_excluded``. ``residual`` is the
    root-mean-square misfit in log space.
    """
    pts = [(float(t), float(g)) for t, g in points]
    if any(t <= 0 or g < 0 or not math.isfinite(g) for t, g in pts):
        raise ValueError('horizons must be positive and gaps nonnegative')
    kept = [(t, g) for t, g in pts if g > 0]
    if len(kept) < min_points:
        raise InsufficientPointsError(f'need {min_points} positive gaps, got {len(kept)}')
    x = np.log([t for t, _ in kept])
    y = np.log([g for _, g in kept])
    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - (slope * x + intercept)
    return RateFit(float(slope), float(intercept), float(np.sqrt(np.mean(resid ** 2))),
                   len(kept), len(pts) - len(kept))


# -- configuration -------------------------------------------------------

@dataclasses.dataclass(eq=False)
class SweepConfig:
    """Everything a sweep needs; round-trips through :meth:`to_dict`.

    ``schedule.seed`` is ignored: chain seeds derive from ``seed``, the stage
    and the restart index, so restarts are independent of execution order.
    """
    cls: AdmissibleClass
    target: TrackingTarget
    horizons: Tuple[float, ...]
    schedule: AnnealSchedule
    restarts: int = 5
    seed: int = 0
    parabolic_schedule: Optional[AnnealSchedule] = None
    init_flips: int = 0
    parabolic_init: str = 'elliptic'
    polish: bool = True
    min_steps: int = 64
    dt_cap: Optional[float] = None
    output_dir: Optional[str] = None
    jobs: int = 1

    def __post_init__(self):
        hs = tuple(float(t) for t in self.horizons)
        if not hs or any(t <= 0 for t in hs) or any(b <= a for a, b in zip(hs, hs[1:])):
            raise ValueError('horizons must be positive and strictly increasing')
        self.horizons = hs
        if self.restarts < 3:
            raise ValueError('a sweep needs at least 3 restarts')
        if self.parabolic_init not in ('elliptic', 'init'):
            raise ValueError("parabolic_init must be 'elliptic' or 'init'")

    @property
    def grid(self):
        return self.cls.grid

    def dt_for(self, T: float) -> float:
        cap = self.dt_cap if self.dt_cap is not None else self.grid.h
        return min(cap, T / self.min_steps)

    def chain_seed(self, stage: int, restart: int) -> int:
        ss = np.random.SeedSequence([self.seed, stage, restart])
        return int(ss.generate_state(1, dtype=np.uint64)[0])

    def to_dict(self) -> dict:
        t = self.target
        return {
            'grid': self.grid.to_dict(),
            'omega': json.loads(self.cls.omega.to_json()),
            'max_components': self.cls.max_components,
            'f': t.f.values.tolist(), 'y0': t.y0.values.tolist(), 'z': t.z.values.tolist(),
            'horizons': list(self.horizons),
            'schedule': dataclasses.asdict(self.schedule),
            'parabolic_schedule': (dataclasses.asdict(self.parabolic_schedule)
                                   if self.parabolic_schedule else None),
            'restarts': self.restarts, 'seed': self.seed, 'init_flips': self.init_flips,
            'parabolic_init': self.parabolic_init, 'polish': self.polish,
            'min_steps': self.min_steps, 'dt_cap': self.dt_cap,
        }

    @classmethod
    def from_dict(cls, d: dict, output_dir: Optional[str] = None, jobs: int = 1) -> 'SweepConfig':
        omega = DomainMask.from_json(d['omega'])
        grid = omega.grid
        field = lambda key: ScalarField(grid, np.array(d[key], dtype=float))
        target = TrackingTarget(field('z'), omega, field('f'), field('y0'))
        ps = d.get('parabolic_schedule')
        return cls(AdmissibleClass(omega, int(d['max_components'])), target, tuple(d['horizons']),
                   AnnealSchedule(**d['schedule']), int(d['restarts']), int(d['seed']),
                   AnnealSchedule(**ps) if ps else None, int(d.get('init_flips', 0)),
                   d.get('parabolic_init', 'elliptic'), bool(d.get('polish', True)),
                   int(d.get('min_steps', 64)), d.get('dt_cap'), output_dir, jobs)


# -- report --------------------------------------------------------------

@dataclasses.dataclass
class SweepRow:
    T: float
    J_T: float
    J_s: float
    gap: float
    dhc: float
    J_T_of_Omega_s: float
    quasi_gap: float
    J_s_of_Omega_T: float
    dhc_to_elliptic_set: float
    seeds: Tuple[int, ...]

    def as_list(self):
        return [repr(self.T), repr(self.J_T), repr(self.J_s), repr(self.gap), repr(self.dhc),
                repr(self.J_T_of_Omega_s), repr(self.quasi_gap), repr(self.J_s_of_Omega_T),
                repr(self.dhc_to_elliptic_set), ' '.join(str(s) for s in self.seeds)]


@dataclasses.dataclass(eq=False)
class SweepReport:
    rows: List[SweepRow]
    fit: Optional[RateFit]
    omega_s: DomainMask
    elliptic_optima: List[DomainMask]
    elliptic_costs: List[float]
    omega_T: List[DomainMask]
    seeds: dict
    manifest: dict

    @property
    def noise_floor(self) -> float:
        return float(max(self.elliptic_costs) - min(self.elliptic_costs))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator='\n')
        writer.writerow(SWEEP_COLUMNS)
        for row in self.rows:
            writer.writerow(row.as_list())
        return buf.getvalue()


@dataclasses.dataclass
class _ChainResult:
    mask: DomainMask
    cost: float
    initial_cost: float
    evaluations: int
    wall_time: float


def _run_chain(cost_fn, cls, init, schedule, do_polish) -> _ChainResult:
    best, trace = optimize(cost_fn, cls, init, schedule)
    cost, evals = trace.best_cost, trace.evaluations
    if do_polish:
        best, cost, extra = polish_with_cost(cost_fn, cls, best, cost)
        evals += extra
    return _ChainResult(best, cost, trace.initial_cost, evals, trace.wall_time)


def _run_chain_args(args):
    return _run_chain(*args)


def _map(jobs: int, tasks):
    if jobs <= 1 or len(tasks) <= 1:
        return [_run_chain_args(t) for t in tasks]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_chain_args, tasks))


def _best_index(costs: Sequence[float]) -> int:
    return min(range(len(costs)), key=lambda r: (costs[r], r))


def run_sweep(config: SweepConfig) -> SweepReport:
    """Solve the stationary problem and the time-averaged one per horizon; fit the gap decay."""
    cls, target = config.cls, config.target
    out = Path(config.output_dir) if config.output_dir else None
    seeds = {'master': config.seed, 'init': [], 'elliptic': [], 'horizons': {}}

    inits = []
    for r in range(config.restarts):
        s = config.chain_seed(_STAGE_INIT, r)
        seeds['init'].append(s)
        inits.append(random_admissible_mask(cls, np.random.default_rng(s), config.init_flips))

    elliptic = EllipticCost(target)
    tasks = []
    for r in range(config.restarts):
        s = config.chain_seed(_STAGE_ELLIPTIC, r)
        seeds['elliptic'].append(s)
        tasks.append((elliptic, cls, inits[r], dataclasses.replace(config.schedule, seed=s), config.polish))
    log.info('stationary problem: %d restarts', config.restarts)
    ell = _map(config.jobs, tasks)
    ell_masks = [c.mask for c in ell]
    ell_costs = [c.cost for c in ell]
    r_star = _best_index(ell_costs)
    omega_s, J_s = ell_masks[r_star], ell_costs[r_star]
    if out is not None:
        _write_mask(out / 'masks' / 'omega_s.txt', omega_s)

    manifest = {'config': config.to_dict(), 'seeds': seeds, 'versions': _versions(), 'partial': True}
    rows: List[SweepRow] = []
    omega_T: List[DomainMask] = []
    pschedule = config.parabolic_schedule or config.schedule
    try:
        for n, T in enumerate(config.horizons):
            cost_T = ParabolicCost(target, T, config.dt_for(T))
            chain_seeds, tasks = [], []
            for r in range(config.restarts):
                s = config.chain_seed(2 + n, r)
                chain_seeds.append(s)
                start = ell_masks[r] if config.parabolic_init == 'elliptic' else inits[r]
                tasks.append((cost_T, cls, start, dataclasses.replace(pschedule, seed=s), config.polish))
            seeds['horizons'][repr(T)] = chain_seeds
            log.info('horizon T=%g: %d restarts', T, config.restarts)
            par = _map(config.jobs, tasks)
            rb = _best_index([c.cost for c in par])
            mask_T, J_T = par[rb].mask, par[rb].cost
            J_T_s = cost_T(omega_s)
            rows.append(SweepRow(
                T=T, J_T=J_T, J_s=J_s, gap=abs(J_T - J_s),
                dhc=complementary_hausdorff(mask_T, omega_s),
                J_T_of_Omega_s=J_T_s, quasi_gap=J_T_s - J_T,
                J_s_of_Omega_T=elliptic(mask_T),
                dhc_to_elliptic_set=min(complementary_hausdorff(mask_T, m) for m in ell_masks),
                seeds=tuple(chain_seeds)))
            omega_T.append(mask_T)
            if out is not None:
                _write_mask(out / 'masks' / f'omega_T_{T:g}.txt', mask_T)
                _write_text(out / 'sweep.csv', _rows_csv(rows))
    finally:
        if out is not None:
            _write_text(out / 'manifest.json', json.dumps(manifest, indent=1))

    fit = None
    if len(rows) >= 4:
        try:
            fit = fit_rate([(row.T, row.gap) for row in rows])
        except InsufficientPointsError:
            log.warning('rate fit skipped: too few positive gaps')
    else:
        log.warning('rate fit skipped: %d horizon(s), need at least 4', len(rows))
    manifest['partial'] = False
    report = SweepReport(rows, fit, omega_s, ell_masks, ell_costs, omega_T, seeds, manifest)
    if out is not None:
        write_run_dir(report, out)
    return report


def _rows_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow(row.as_list())
    return buf.getvalue()


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _write_mask(path: Path, mask: DomainMask):
    _write_text(path, mask.to_text())


def _versions() -> dict:
    return {'turnpike': __version__, 'numpy': np.__version__, 'scipy': scipy.__version__,
            'python': platform.python_version()}


def write_run_dir(report: SweepReport, out: Path):
    """Write manifest, sweep table, rate fit, masks and the two log-log plots."""
    from turnpike.plots import loglog_svg

    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / 'manifest.json', json.dumps(report.manifest, indent=1))
    _write_text(out / 'sweep.csv', report.to_csv())
    rate = report.fit.to_dict() if report.fit else None
    _write_text(out / 'rate.json', json.dumps({'fit': rate, 'noise_floor': report.noise_floor}, indent=1))
    _write_mask(out / 'masks' / 'omega_s.txt', report.omega_s)
    for r, m in enumerate(report.elliptic_optima):
        _write_mask(out / 'masks' / f'omega_s_restart{r}.txt', m)
    for row, m in zip(report.rows, report.omega_T):
        _write_mask(out / 'masks' / f'omega_T_{row.T:g}.txt', m)
    Ts = [row.T for row in report.rows]
    gap_series = [('|J_T - J_s|', Ts, [row.gap for row in report.rows]),
                  ('J_T(Omega_s) - J_T', Ts, [row.quasi_gap for row in report.rows])]
    ref = None
    if report.fit is not None:
        ref = ('C / sqrt(T)', Ts, [report.fit.constant * Ts[0] ** (report.fit.slope + 0.5) / math.sqrt(t)
                                   for t in Ts])
    _write_text(out / 'gap.svg', loglog_svg(gap_series + ([ref] if ref else []),
                                            title='optimal value gap', xlabel='T', ylabel='gap'))
    h = report.omega_s.grid.h
    _write_text(out / 'hc.svg', loglog_svg([('d_Hc(Omega_T, Omega_s) / h', Ts,
                                             [row.dhc / h for row in report.rows])],
                                           title='complementary Hausdorff distance', xlabel='T',
                                           ylabel='distance / h'))


# -- post-processing -------------------------------------------------------

@dataclasses.dataclass
class QuasiOptimality:
    values: List[float]
    noise_floor: float
    fit: Optional[RateFit]

    @property
    def nonnegative(self) -> bool:
        return all(v >= -self.noise_floor for v in self.values)

    @property
    def rate_ok(self) -> bool:
        return self.fit is not None and self.fit.slope <= -0.5


def quasi_optimality(report: SweepReport, noise_floor: Optional[float] = None) -> QuasiOptimality:
    """``J_T(Omega_s) - J_T`` per horizon with its log-log fit (None when under 4 positive values)."""
    floor = report.noise_floor if noise_floor is None else noise_floor
    values = [row.J_T_of_Omega_s - row.J_T for row in report.rows]
    fit = None
    pts = [(row.T, max(v, 0.0)) for row, v in zip(report.rows, values)]
    try:
        fit = fit_rate(pts)
    except InsufficientPointsError:
        pass
    return QuasiOptimality(values, floor, fit)


@dataclasses.dataclass
class ProbeTable:
    rows: List[Tuple[float, float]]  # (d_Hc to base, H^1(D) error)

    @property
    def nonincreasing(self) -> bool:
        errs = [e for _, e in self.rows]
        return all(b <= a for a, b in zip(errs, errs[1:]))

    @property
    def vanishes(self) -> bool:
        return self.rows[-1][1] == 0.0


def shrinking_hole_schedule(base: DomainMask, corner: Tuple[int, int], sizes: Sequence[int]) -> List[DomainMask]:
    """Masks with a square hole of each size, anchored at ``corner`` = (i, j) and growing up-right."""
    i0, j0 = corner
    return [base.without_block((i0, i0 + k, j0, j0 + k)) if k > 0 else base for k in sizes]


def gamma_convergence_probe(base: DomainMask, schedule: Sequence[DomainMask], f: ScalarField,
                            cls: Optional[AdmissibleClass] = None) -> ProbeTable:
    """Pair each mask's distance to ``base`` with the H^1(D) distance of the Poisson solutions."""
    if cls is not None:
        for m in [base, *schedule]:
            if not is_admissible(m, cls):
                raise InadmissiblePerturbationError(f'{m!r} is outside the admissible class')
    dists = [complementary_hausdorff(m, base) for m in schedule]
    if any(b >= a for a, b in zip(dists, dists[1:])):
        raise ValueError('schedule distances to the base mask must strictly decrease')
    p = solve_poisson(base, f)
    rows = []
    for m, d in zip(schedule, dists):
        err = (solve_poisson(m, f) - p).h1_norm()
        rows.append((d, err))
    return ProbeTable(rows)
