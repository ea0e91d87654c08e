"""Tracking costs over the observation region: stationary and time-averaged.

Both costs sum ``h^2 (|v|^2 + |grad_h v|^2)`` over the cells of omega, where
``v`` is the state minus the target, both extended by zero, and the gradient
uses forward differences. The time average is a left-endpoint Riemann sum
over the implicit Euler steps.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import os
from typing import Optional, Sequence, Union

import numpy as np

from turnpike.domain import DomainMask
from turnpike.errors import GridMismatchError
from turnpike.fields import ScalarField
from turnpike.pde_core import HeatStepper, PoissonSolver, default_dt, step_count

# relative size of a step increment below which the trajectory is stationary
STATIONARY_TOL = 1e-15

LEDGER_COLUMNS = ('mask_id', 'horizon', 'value', 'l2_part', 'h1_part')


@dataclasses.dataclass(eq=False)
class TrackingTarget:
    """Target state ``z``, observation region, source ``f`` and initial datum ``y0``."""
    z: ScalarField
    omega: DomainMask
    f: ScalarField
    y0: ScalarField

    def __post_init__(self):
        grid = self.omega.grid
        for name in ('z', 'f', 'y0'):
            if getattr(self, name).grid != grid:
                raise GridMismatchError(f'{name} is not on the observation grid')
        if np.any(self.z.values[grid.frame()] != 0):
            raise ValueError('target z must vanish on the frame')


@dataclasses.dataclass
class CostReport:
    value: float
    l2_part: float
    h1_part: float
    horizon: Union[float, str]
    pde_stats: dict = dataclasses.field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self))

    @classmethod
    def from_json(cls, text: str) -> 'CostReport':
        return cls(**json.loads(text))


class _Observer:
    """Gathers state values on omega and its forward neighbours from an active-cell vector."""

    def __init__(self, mask: DomainMask, target: TrackingTarget):
        if mask.grid != target.omega.grid:
            raise GridMismatchError('mask and target live on different grids')
        grid = mask.grid
        self.h = grid.h
        index = np.full(grid.shape, -1, dtype=np.int64)
        index[mask.active] = np.arange(mask.n_active)
        jj, ii = np.nonzero(target.omega.active)
        z = target.z.values
        # three stencil points per omega cell: itself, right, up
        self.idx = np.stack([index[jj, ii], index[jj, ii + 1], index[jj + 1, ii]])
        self.z = np.stack([z[jj, ii], z[jj, ii + 1], z[jj + 1, ii]])

    def parts(self, y: np.ndarray):
        l2, h1 = self.batch_parts(y[None, :])
        return float(l2[0]), float(h1[0])

    def batch_parts(self, Y: np.ndarray):
        """Per-row ``(l2, h1)`` parts for a stack of states, shape ``(m, n_active)``."""
        ext = np.concatenate([Y, np.zeros((Y.shape[0], 1))], axis=1)
        v = ext[:, self.idx] - self.z
        l2 = self.h ** 2 * np.sum(v[:, 0] ** 2, axis=1)
        h1 = np.sum((v[:, 1] - v[:, 0]) ** 2, axis=1) + np.sum((v[:, 2] - v[:, 0]) ** 2, axis=1)
        return l2, h1


def elliptic_cost(mask: DomainMask, target: TrackingTarget, method: str = 'direct') -> CostReport:
    """Stationary cost of the Poisson solution on ``mask``."""
    solver = PoissonSolver(mask, method)
    p = solver.solve_vector(target.f.values[mask.active])
    l2, h1 = _Observer(mask, target).parts(p)
    stats = {'residual': solver.last_residual, 'iterations': solver.last_iterations,
             'dimension': solver.op.dimension}
    return CostReport(l2 + h1, l2, h1, 'stationary', stats)


def parabolic_cost(mask: DomainMask, target: TrackingTarget, T: float, dt: Optional[float] = None,
                   stationary_tol: Optional[float] = STATIONARY_TOL) -> CostReport:
    """Time-averaged cost of the implicit Euler trajectory on ``[0, T]``.

    Once a step changes the state by less than ``stationary_tol`` (relative,
    max norm) the remaining steps repeat the same summand and are added in
    closed form. Pass ``stationary_tol=None`` to step all the way to ``T``.
    """
    if not T > 0:
        raise ValueError('horizon T must be positive')
    if dt is None:
        dt = default_dt(mask.grid.h, T)
    K = step_count(T, dt)
    dt = T / K
    stepper = HeatStepper(mask, dt)
    obs = _Observer(mask, target)
    f = target.f.values[mask.active]
    y = target.y0.values[mask.active].copy()

    states = [y]
    repeat = 0
    for k in range(K - 1):
        y_next = stepper.step(y, f, check=False)
        states.append(y_next)
        if stationary_tol is not None:
            scale = np.max(np.abs(y_next), initial=0.0)
            if np.max(np.abs(y_next - y), initial=0.0) <= stationary_tol * scale:
                repeat = K - 2 - k
                break
        y = y_next
    Y = np.array(states)
    stepper.check_steps(Y[:-1], Y[1:], f)
    l2, h1 = obs.batch_parts(Y)
    # the last stored state stands for itself and every skipped step after it
    weights = np.ones(len(states))
    weights[-1] += repeat
    l2_part = float(weights @ l2) * dt / T
    h1_part = float(weights @ h1) * dt / T
    taken = len(states) - 1
    stats = {'steps_total': K, 'steps_taken': taken, 'dt': dt, 'max_residual': stepper.max_residual}
    return CostReport(l2_part + h1_part, l2_part, h1_part, float(T), stats)


class EllipticCost:
    """Picklable ``mask -> J^s(mask)`` for the optimizer."""

    def __init__(self, target: TrackingTarget):
        self.target = target

    def report(self, mask: DomainMask) -> CostReport:
        return elliptic_cost(mask, self.target)

    def __call__(self, mask: DomainMask) -> float:
        return self.report(mask).value


class ParabolicCost:
    """Picklable ``mask -> J^T(mask)`` at a fixed horizon."""

    def __init__(self, target: TrackingTarget, T: float, dt: Optional[float] = None,
                 min_steps: int = 64):
        self.target = target
        self.T = T
        self.dt = dt if dt is not None else default_dt(target.omega.grid.h, T, min_steps)

    def report(self, mask: DomainMask) -> CostReport:
        return parabolic_cost(mask, self.target, self.T, self.dt)

    def __call__(self, mask: DomainMask) -> float:
        return self.report(mask).value


def append_ledger(path: Union[str, os.PathLike], mask_id, reports: Sequence[CostReport]):
    """Append cost reports to a CSV ledger, writing the header for a new file."""
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, 'a', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        if new:
            writer.writerow(LEDGER_COLUMNS)
        for r in reports:
            writer.writerow([mask_id, r.horizon, repr(r.value), repr(r.l2_part), repr(r.h1_part)])
