"""Five-point Dirichlet Laplacian on a mask, Poisson and heat solves, first eigenpair.

Unknowns live on the active cells in row-major order (``grid[mask.active]``).
Inactive cells carry the homogeneous Dirichlet condition, so every returned
field is already extended by zero.
"""
from __future__ import annotations

import dataclasses
import math
from typing import List, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from turnpike.domain import DomainMask
from turnpike.errors import ConvergenceError, GridMismatchError, SolverDivergenceError
from turnpike.fields import ScalarField

RESIDUAL_TOL = 1e-10
EIGEN_TOL = 1e-8


@dataclasses.dataclass(eq=False)
class SparseOperator:
    """``-Laplace_h`` restricted to the active cells of a mask."""
    matrix: sp.csc_matrix
    index: np.ndarray  # (ny, nx) -> unknown number, -1 on inactive cells
    scale: float
    mask_id: int = -1

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u


@dataclasses.dataclass(eq=False)
class HeatTrajectory:
    times: np.ndarray
    states: List[ScalarField]
    dt: float

    @property
    def final(self) -> ScalarField:
        return self.states[-1]


def assemble_laplacian(mask: DomainMask) -> SparseOperator:
    """Assemble the SPD matrix with 4/h^2 on the diagonal and -1/h^2 between 4-adjacent active cells."""
    a = mask.active
    h2 = mask.grid.h ** 2
    n = int(a.sum())
    index = np.full(a.shape, -1, dtype=np.int64)
    index[a] = np.arange(n)

    horiz = a[:, :-1] & a[:, 1:]
    vert = a[:-1, :] & a[1:, :]
    left, right = index[:, :-1][horiz], index[:, 1:][horiz]
    low, up = index[:-1, :][vert], index[1:, :][vert]

    rows = np.concatenate([np.arange(n), left, right, low, up])
    cols = np.concatenate([np.arange(n), right, left, up, low])
    vals = np.concatenate([np.full(n, 4.0 / h2), np.full(2 * (left.size + low.size), -1.0 / h2)])
    matrix = sp.csc_matrix((vals, (rows, cols)), shape=(n, n))
    return SparseOperator(matrix, index, mask.grid.h, mask.generation)


def _restrict(mask: DomainMask, field: ScalarField) -> np.ndarray:
    if field.grid != mask.grid:
        raise GridMismatchError('field and mask live on different grids')
    return field.values[mask.active]


def _check_residual(A, x, b, what: str) -> float:
    bnorm = np.linalg.norm(b)
    res = np.linalg.norm(A @ x - b)
    rel = res / bnorm if bnorm > 0 else res
    if not np.isfinite(rel) or rel > RESIDUAL_TOL:
        raise SolverDivergenceError(f'{what}: relative residual {rel:.3e} exceeds {RESIDUAL_TOL:g}')
    return float(rel)


class PoissonSolver:
    """Factorized ``A_h`` for repeated Poisson solves on one mask.

    ``method='direct'`` uses a sparse LU factorization; ``method='cg'`` runs
    conjugate gradients with relative tolerance 1e-10 and at most
    ``10 * dimension`` iterations. Both verify the residual afterwards.
    """

    def __init__(self, mask: DomainMask, method: str = 'direct', op: Optional[SparseOperator] = None):
        if method not in ('direct', 'cg'):
            raise ValueError(f'unknown method {method!r}')
        self.mask = mask
        self.method = method
        self.op = op if op is not None else assemble_laplacian(mask)
        self._lu = spla.splu(self.op.matrix, permc_spec='MMD_AT_PLUS_A') if method == 'direct' else None
        self.last_residual = 0.0
        self.last_iterations = 0

    def solve_vector(self, b: np.ndarray) -> np.ndarray:
        A = self.op.matrix
        if not np.any(b):
            self.last_residual, self.last_iterations = 0.0, 0
            return np.zeros_like(b)
        if self._lu is not None:
            x = self._lu.solve(b)
            self.last_iterations = 1
        else:
            count = [0]

            def _tick(_):
                count[0] += 1
            x, info = spla.cg(A, b, rtol=0.5 * RESIDUAL_TOL, atol=0.0, maxiter=10 * A.shape[0], callback=_tick)
            self.last_iterations = count[0]
        self.last_residual = _check_residual(A, x, b, 'Poisson solve')
        return x

    def solve(self, f: ScalarField) -> ScalarField:
        x = self.solve_vector(_restrict(self.mask, f))
        out = np.zeros(self.mask.grid.shape)
        out[self.mask.active] = x
        return ScalarField(self.mask.grid, out, self.mask.generation)


def solve_poisson(mask: DomainMask, f: ScalarField, method: str = 'direct') -> ScalarField:
    """Solve ``-Laplace_h p = f`` on the active cells, ``p = 0`` elsewhere."""
    return PoissonSolver(mask, method).solve(f)


def default_dt(h: float, T: float, min_steps: int = 64) -> float:
    return min(h, T / min_steps)


def step_count(T: float, dt: float) -> int:
    """Number of implicit Euler steps covering ``[0, T]`` with step at most ``dt``."""
    return max(1, math.ceil(T / dt - 1e-9))


class HeatStepper:
    """One implicit Euler step ``(I + dt A_h) y_next = y + dt f``, factorized once."""

    def __init__(self, mask: DomainMask, dt: float, op: Optional[SparseOperator] = None):
        if not dt > 0:
            raise ValueError('dt must be positive')
        self.mask = mask
        self.dt = dt
        self.op = op if op is not None else assemble_laplacian(mask)
        n = self.op.dimension
        self.system = (sp.identity(n, format='csc') + dt * self.op.matrix).tocsc()
        self._lu = spla.splu(self.system, permc_spec='MMD_AT_PLUS_A')
        self.max_residual = 0.0

    def step(self, y: np.ndarray, f: np.ndarray, check: bool = True) -> np.ndarray:
        rhs = y + self.dt * f
        y_next = self._lu.solve(rhs)
        if check and np.any(rhs):
            res = _check_residual(self.system, y_next, rhs, 'heat step')
            self.max_residual = max(self.max_residual, res)
        return y_next

    def check_steps(self, before: np.ndarray, after: np.ndarray, f: np.ndarray):
        """Verify the residual of many steps at once; rows of ``after`` follow rows of ``before``."""
        if before.size == 0:
            return
        rhs = before + self.dt * f
        res = np.linalg.norm((self.system @ after.T).T - rhs, axis=1)
        scale = np.linalg.norm(rhs, axis=1)
        rel = np.where(scale > 0, res / np.where(scale > 0, scale, 1.0), res)
        bad = np.flatnonzero(~(rel <= RESIDUAL_TOL))
        if bad.size:
            raise SolverDivergenceError(f'heat step {bad[0] + 1}: relative residual '
                                        f'{rel[bad[0]]:.3e} exceeds {RESIDUAL_TOL:g}')
        self.max_residual = max(self.max_residual, float(rel.max()))


def solve_heat(mask: DomainMask, f: ScalarField, y0: ScalarField, T: float,
               dt: Optional[float] = None, stride: int = 1) -> HeatTrajectory:
    """Implicit Euler trajectory on ``[0, T]`` for a time-independent source.

    The step is shrunk so that it divides ``T``. States are kept every
    ``stride`` steps; the initial and final states are always kept.
    """
    if not T > 0:
        raise ValueError('horizon T must be positive')
    if dt is None:
        dt = default_dt(mask.grid.h, T)
    if not 0 < dt <= T:
        raise ValueError(f'need 0 < dt <= T, got dt={dt}, T={T}')
    K = step_count(T, dt)
    dt = T / K
    stepper = HeatStepper(mask, dt)
    fv = _restrict(mask, f)
    y = _restrict(mask, y0).copy()

    def as_field(v):
        out = np.zeros(mask.grid.shape)
        out[mask.active] = v
        return ScalarField(mask.grid, out, mask.generation)

    times, states = [0.0], [as_field(y)]
    for k in range(1, K + 1):
        y = stepper.step(y, fv)
        if k % stride == 0 or k == K:
            times.append(k * dt if k < K else T)
            states.append(as_field(y))
    return HeatTrajectory(np.array(times), states, dt)


def smallest_eigenvalue(mask: DomainMask, tol: float = EIGEN_TOL, maxiter: int = 2000,
                        solver: Optional[PoissonSolver] = None):
    """First Dirichlet eigenpair of ``A_h`` by inverse power iteration.

    Stops once the Rayleigh quotient changes by less than ``tol`` relative.
    The eigenvector is scaled to unit discrete L^2 norm with a nonnegative sum.
    """
    solver = solver if solver is not None else PoissonSolver(mask)
    A = solver.op.matrix
    h = mask.grid.h
    u = np.ones(solver.op.dimension)
    u /= np.linalg.norm(u)
    rq = float(u @ (A @ u))
    for _ in range(maxiter):
        v = solver.solve_vector(u)
        u = v / np.linalg.norm(v)
        rq_new = float(u @ (A @ u))
        if abs(rq_new - rq) <= tol * abs(rq_new):
            rq = rq_new
            break
        rq = rq_new
    else:
        raise ConvergenceError(f'inverse iteration did not settle within {maxiter} iterations')
    if u.sum() < 0:
        u = -u
    out = np.zeros(mask.grid.shape)
    out[mask.active] = u / h
    return rq, ScalarField(mask.grid, out, mask.generation)
