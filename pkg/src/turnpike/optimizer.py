"""Simulated annealing and greedy polishing over single-cell flips.

Moves flip one cell on the discrete boundary of the current domain: an active
cell with an inactive 4-neighbour is deactivated, an inactive non-frame cell
with an active 4-neighbour is activated. Cells of omega are never
deactivated. Annealing additionally proposes, at a small rate, deactivating
an arbitrary interior cell so that holes can nucleate away from the existing
boundary. Inadmissible proposals are rejected before the cost is evaluated.
"""
from __future__ import annotations

import collections
import csv
import dataclasses
import math
import time
from typing import Callable, List, Optional, TextIO, Tuple

import numpy as np

from turnpike.domain import AdmissibleClass, DomainMask, boundary_cells, count_complement_components, is_admissible
from turnpike.errors import InfeasibleInitError

CostFn = Callable[[DomainMask], float]

TRACE_COLUMNS = ('step', 'accepted', 'cost', 'n_components', 'temperature', 'proposed_cost')


@dataclasses.dataclass(frozen=True)
class MoveProposal:
    cell: Tuple[int, int]  # (i, j)
    direction: str  # 'activate' | 'deactivate'

    def apply(self, mask: DomainMask) -> DomainMask:
        return mask.with_cells([self.cell], self.direction == 'activate')


@dataclasses.dataclass(frozen=True)
class AnnealSchedule:
    """Geometric cooling schedule.

    With ``relative=True`` the temperatures are multiples of the initial
    cost, which keeps one schedule usable across targets of any scale.
    """
    initial_temperature: float
    cooling: float
    steps_per_temperature: int
    budget: int
    seed: int = 0
    relative: bool = False
    nucleation_rate: float = 0.05

    def __post_init__(self):
        if self.initial_temperature < 0:
            raise ValueError('initial temperature must be nonnegative')
        if not 0 < self.cooling < 1:
            raise ValueError('cooling factor must lie in (0, 1)')
        if self.steps_per_temperature < 1:
            raise ValueError('steps per temperature must be positive')
        if self.budget < 0:
            raise ValueError('budget must be nonnegative')
        if not 0 <= self.nucleation_rate <= 1:
            raise ValueError('nucleation rate must lie in [0, 1]')

    def temperature(self, step: int, scale: float = 1.0) -> float:
        level = (step - 1) // self.steps_per_temperature if step > 0 else 0
        t = self.initial_temperature * self.cooling ** level
        return t * scale if self.relative else t


@dataclasses.dataclass
class TraceRow:
    """Chain state after one step; ``proposed_cost`` is NaN for hard-rejected moves."""
    step: int
    accepted: bool
    cost: float
    n_components: int
    temperature: float
    proposed_cost: float

    def as_list(self):
        return [self.step, int(self.accepted), repr(self.cost), self.n_components,
                repr(self.temperature), repr(self.proposed_cost)]


@dataclasses.dataclass
class OptimizationTrace:
    rows: List[TraceRow]
    best_mask: DomainMask
    best_cost: float
    initial_cost: float
    wall_time: float = 0.0
    evaluations: int = 0

    def write_csv(self, fh: TextIO):
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(TRACE_COLUMNS)
        for row in self.rows:
            writer.writerow(row.as_list())


def candidate_moves(mask: DomainMask, cls: AdmissibleClass) -> List[MoveProposal]:
    """All boundary flips allowed by the move rules, in row-major cell order."""
    inner, outer = boundary_cells(mask)
    inner &= ~cls.omega.active
    moves = []
    for j, i in zip(*np.nonzero(inner | outer)):
        moves.append(MoveProposal((int(i), int(j)), 'deactivate' if inner[j, i] else 'activate'))
    return moves


def _is_valid_move(move: MoveProposal, mask: DomainMask, cls: AdmissibleClass) -> bool:
    i, j = move.cell
    a = mask.active
    if move.direction == 'deactivate':
        if not a[j, i] or cls.omega.active[j, i]:
            return False
        return not (a[j - 1, i] and a[j + 1, i] and a[j, i - 1] and a[j, i + 1])
    if a[j, i] or mask.grid.frame()[j, i]:
        return False
    return bool(a[j - 1, i] or a[j + 1, i] or a[j, i - 1] or a[j, i + 1])


def _propose(mask: DomainMask, cls: AdmissibleClass, rng: np.random.Generator,
             nucleation_rate: float) -> Optional[MoveProposal]:
    if rng.random() < nucleation_rate:
        pool = np.flatnonzero(mask.active & ~cls.omega.active)
        if pool.size == 0:
            return None
        j, i = np.unravel_index(pool[rng.integers(pool.size)], mask.grid.shape)
        return MoveProposal((int(i), int(j)), 'deactivate')
    moves = candidate_moves(mask, cls)
    if not moves:
        return None
    return moves[rng.integers(len(moves))]


class _CostMemo:
    """Bounded LRU of cost values keyed by mask contents (costs are pure functions of the mask)."""

    def __init__(self, cost_fn: CostFn, size: int):
        self.cost_fn = cost_fn
        self.size = size
        self.store = collections.OrderedDict()
        self.evaluations = 0

    def __call__(self, mask: DomainMask) -> float:
        key = mask.key()
        if key in self.store:
            self.store.move_to_end(key)
            return self.store[key]
        value = float(self.cost_fn(mask))
        self.evaluations += 1
        if self.size > 0:
            self.store[key] = value
            if len(self.store) > self.size:
                self.store.popitem(last=False)
        return value


def optimize(cost_fn: CostFn, cls: AdmissibleClass, init: DomainMask, schedule: AnnealSchedule,
             trace_file: Optional[TextIO] = None, cache_size: int = 4096) -> Tuple[DomainMask, OptimizationTrace]:
    """Anneal over admissible masks; return the best mask visited and the trace.

    Acceptance: a strictly better proposal is always taken; otherwise it is
    taken when a fresh uniform draw falls below ``exp(-delta / temperature)``
    (never at temperature zero). Ties in the best cost keep the earliest mask.
    Costs of recently visited masks are memoized (``cache_size=0`` disables).
    """
    if init.grid != cls.grid or not is_admissible(init, cls):
        raise InfeasibleInitError('initial mask is not admissible')
    start = time.perf_counter()
    rng = np.random.default_rng(schedule.seed)
    writer = None
    if trace_file is not None:
        writer = csv.writer(trace_file, lineterminator='\n')
        writer.writerow(TRACE_COLUMNS)

    cost_fn = _CostMemo(cost_fn, cache_size)
    current = init
    cost = cost_fn(init)
    scale = abs(cost) if cost != 0 else 1.0
    best, best_cost = current, cost
    ncomp = count_complement_components(current)
    rows = [TraceRow(0, True, cost, ncomp, schedule.temperature(0, scale), cost)]
    if writer:
        writer.writerow(rows[0].as_list())

    for step in range(1, schedule.budget + 1):
        temp = schedule.temperature(step, scale)
        move = _propose(current, cls, rng, schedule.nucleation_rate)
        u = rng.random()
        accepted, proposed_cost = False, math.nan
        if move is not None:
            candidate = move.apply(current)
            if is_admissible(candidate, cls):
                proposed_cost = cost_fn(candidate)
                delta = proposed_cost - cost
                if delta < 0 or (temp > 0 and u < math.exp(-delta / temp)):
                    accepted = True
                    current, cost = candidate, proposed_cost
                    ncomp = count_complement_components(current)
                    if cost < best_cost:
                        best, best_cost = current, cost
        row = TraceRow(step, accepted, cost, ncomp, temp, proposed_cost)
        rows.append(row)
        if writer:
            writer.writerow(row.as_list())

    trace = OptimizationTrace(rows, best, best_cost, rows[0].cost,
                              time.perf_counter() - start, cost_fn.evaluations)
    return best, trace


def polish_with_cost(cost_fn: CostFn, cls: AdmissibleClass, mask: DomainMask,
                     cost: Optional[float] = None, max_passes: int = 100) -> Tuple[DomainMask, float, int]:
    """Greedy first-improvement descent; returns ``(mask, cost, evaluations)``."""
    if cost is None:
        cost = float(cost_fn(mask))
    evaluations = 0
    for _ in range(max_passes):
        improved = False
        for move in candidate_moves(mask, cls):
            if not _is_valid_move(move, mask, cls):
                continue
            candidate = move.apply(mask)
            if not is_admissible(candidate, cls):
                continue
            c = float(cost_fn(candidate))
            evaluations += 1
            if c < cost:
                mask, cost, improved = candidate, c, True
        if not improved:
            break
    return mask, cost, evaluations


def polish(cost_fn: CostFn, cls: AdmissibleClass, mask: DomainMask) -> DomainMask:
    """Descend to a local minimum under boundary flips, accepting strict improvements only."""
    return polish_with_cost(cost_fn, cls, mask)[0]


def random_admissible_mask(cls: AdmissibleClass, rng: np.random.Generator, n_flips: int,
                           start: Optional[DomainMask] = None) -> DomainMask:
    """Random walk of admissible boundary flips starting from ``start`` (default: full interior)."""
    mask = start if start is not None else DomainMask.full_interior(cls.grid)
    if not is_admissible(mask, cls):
        raise InfeasibleInitError('random walk must start from an admissible mask')
    for _ in range(n_flips):
        moves = candidate_moves(mask, cls)
        if not moves:
            break
        candidate = moves[rng.integers(len(moves))].apply(mask)
        if is_admissible(candidate, cls):
            mask = candidate
    return mask
