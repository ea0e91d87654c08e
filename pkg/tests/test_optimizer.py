import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import admissible_masks
from turnpike.costs import EllipticCost
from turnpike.domain import DomainMask, complementary_hausdorff, count_complement_components, is_admissible
from turnpike.errors import InfeasibleInitError
from turnpike.optimizer import (TRACE_COLUMNS, AnnealSchedule, MoveProposal, candidate_moves, optimize, polish,
                                polish_with_cost, random_admissible_mask)


class Recording:
    """Cost wrapper remembering every mask it was asked to evaluate."""

    def __init__(self, fn):
        self.fn = fn
        self.seen = []

    def __call__(self, mask):
        self.seen.append(mask)
        return self.fn(mask)


def schedule(budget, seed=0, t0=1e-3, **kw):
    return AnnealSchedule(t0, 0.7, 20, budget, seed, relative=True, **kw)


def test_schedule_validation():
    with pytest.raises(ValueError):
        AnnealSchedule(1.0, 1.0, 10, 10)
    with pytest.raises(ValueError):
        AnnealSchedule(-1.0, 0.5, 10, 10)
    with pytest.raises(ValueError):
        AnnealSchedule(1.0, 0.5, 0, 10)
    s = AnnealSchedule(2.0, 0.5, 10, 100)
    assert s.temperature(1) == 2.0 and s.temperature(10) == 2.0 and s.temperature(11) == 1.0
    assert AnnealSchedule(2.0, 0.5, 10, 100, relative=True).temperature(11, 3.0) == 3.0


def test_zero_budget_returns_init(small_fixture):
    cls, target, _ = small_fixture
    init = DomainMask.full_interior(cls.grid)
    best, trace = optimize(EllipticCost(target), cls, init, schedule(0))
    assert best is init
    assert len(trace.rows) == 1
    assert trace.rows[0].cost == trace.best_cost == trace.initial_cost


def test_infeasible_init(small_fixture):
    cls, target, _ = small_fixture
    bad = DomainMask.full_interior(cls.grid).flipped(11, 11)  # inside omega
    with pytest.raises(InfeasibleInitError):
        optimize(EllipticCost(target), cls, bad, schedule(5))


@settings(max_examples=10)
@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 40))
def test_trace_invariants(small_fixture, seed, flips):
    cls, target, _ = small_fixture
    init = random_admissible_mask(cls, np.random.default_rng(seed), flips)
    cost = Recording(EllipticCost(target))
    best, trace = optimize(cost, cls, init, schedule(60, seed, t0=0.05))
    # constraint never violated: everything evaluated was admissible
    assert all(is_admissible(m, cls) for m in cost.seen)
    assert all(r.n_components <= cls.max_components for r in trace.rows)
    assert trace.best_cost <= trace.initial_cost
    accepted = [r.cost for r in trace.rows if r.accepted]
    assert trace.best_cost == min(accepted)
    assert cost.fn(best) == trace.best_cost
    assert is_admissible(best, cls)


def test_reproducible_for_fixed_seed(small_fixture):
    cls, target, _ = small_fixture
    init = DomainMask.full_interior(cls.grid)
    runs = []
    for _ in range(2):
        buf = io.StringIO()
        best, trace = optimize(EllipticCost(target), cls, init, schedule(80, 5, t0=0.05), trace_file=buf)
        runs.append((best, buf.getvalue()))
    assert runs[0][0] == runs[1][0]
    assert runs[0][1] == runs[1][1]
    assert runs[0][1].splitlines()[0] == ','.join(TRACE_COLUMNS)
    assert len(runs[0][1].splitlines()) == 82


def test_cost_memo_does_not_change_trace(small_fixture):
    cls, target, _ = small_fixture
    init = DomainMask.full_interior(cls.grid)
    _, a = optimize(EllipticCost(target), cls, init, schedule(80, 2, t0=0.05))
    _, b = optimize(EllipticCost(target), cls, init, schedule(80, 2, t0=0.05), cache_size=0)
    assert [r.as_list() for r in a.rows] == [r.as_list() for r in b.rows]
    assert a.evaluations <= b.evaluations


def test_zero_temperature_accepts_only_strict_improvements(small_fixture):
    cls, target, _ = small_fixture
    init = DomainMask.full_interior(cls.grid)
    _, trace = optimize(EllipticCost(target), cls, init, schedule(120, 3, t0=0.0))
    prev = trace.rows[0].cost
    for r in trace.rows[1:]:
        if not math.isnan(r.proposed_cost):
            assert r.accepted == (r.proposed_cost < prev)
        prev = r.cost
    costs = [r.cost for r in trace.rows]
    assert all(b <= a for a, b in zip(costs, costs[1:]))


@settings(max_examples=20)
@given(admissible_masks())
def test_candidate_moves_respect_rules(pair):
    cls, m = pair
    frame = m.grid.frame()
    for mv in candidate_moves(m, cls):
        i, j = mv.cell
        nbs = [m.active[j + 1, i], m.active[j - 1, i], m.active[j, i + 1], m.active[j, i - 1]]
        if mv.direction == 'deactivate':
            assert m.active[j, i] and not cls.omega.active[j, i] and not all(nbs)
        else:
            assert not m.active[j, i] and not frame[j, i] and any(nbs)


def test_move_apply():
    from turnpike.fields import GridSpec
    m = DomainMask.full_interior(GridSpec(6, 6, 1.0))
    assert not MoveProposal((1, 1), 'deactivate').apply(m).active[1, 1]


def test_polish_is_monotone_and_idempotent(small_fixture):
    cls, target, planted = small_fixture
    cost = EllipticCost(target)
    start = random_admissible_mask(cls, np.random.default_rng(4), 30)
    out, c, _ = polish_with_cost(cost, cls, start)
    assert c <= cost(start) and c == cost(out)
    assert is_admissible(out, cls)
    assert polish(cost, cls, out) == out
    # the planted mask has zero cost, so no flip can improve it
    assert polish(cost, cls, planted) == planted


def test_random_admissible_mask(small_fixture):
    cls, _, _ = small_fixture
    for seed in range(5):
        m = random_admissible_mask(cls, np.random.default_rng(seed), 50)
        assert is_admissible(m, cls)
    with pytest.raises(InfeasibleInitError):
        random_admissible_mask(cls, np.random.default_rng(0), 5,
                               start=DomainMask.full_interior(cls.grid).flipped(11, 11))


def test_small_planted_recovery(small_fixture):
    cls, target, planted = small_fixture
    cost = EllipticCost(target)
    init = DomainMask.full_interior(cls.grid)
    sched = AnnealSchedule(3e-4, 0.5, 200, 3000, 1, relative=True)
    best, trace = optimize(cost, cls, init, sched)
    assert trace.best_cost <= 1e-2 * trace.initial_cost


@pytest.mark.slow
def test_planted_optimum_48(planted_fixture):
    cls, target, planted = planted_fixture
    cost = EllipticCost(target)
    assert cost(planted) == 0.0
    init = DomainMask.full_interior(cls.grid)
    sched = AnnealSchedule(3e-4, 0.5, 1000, 20000, 0, relative=True)
    best, trace = optimize(cost, cls, init, sched)
    assert trace.best_cost <= 1e-3 * trace.initial_cost
    assert count_complement_components(best) <= 2
    polished, pc, _ = polish_with_cost(cost, cls, best, trace.best_cost)
    assert pc <= trace.best_cost
    print(f'anneal {trace.best_cost / trace.initial_cost:.3e}, polish {pc / trace.initial_cost:.3e}, '
          f'd_Hc {complementary_hausdorff(best, planted):.4f} -> {complementary_hausdorff(polished, planted):.4f}')
