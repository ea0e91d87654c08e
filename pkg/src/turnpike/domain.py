"""Rasterized domains, the admissible class and the Hausdorff distances.

A domain is a union of open grid cells. The complement of a domain is the set
of inactive cells; the outer frame is always inactive and stands in for the
boundary of the design rectangle. Active cells connect through edges
(4-connectivity); complement cells also connect through corners
(8-connectivity), so a diagonal crack in the domain never splits the
complement.
"""
from __future__ import annotations

import dataclasses
import json
from typing import Iterable, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from turnpike.errors import EmptySetError, GridMismatchError, InvalidMaskError
from turnpike.fields import GridSpec, ScalarField

COMPLEMENT_STRUCTURE = np.ones((3, 3), dtype=bool)
DOMAIN_STRUCTURE = ndimage.generate_binary_structure(2, 1)

Block = Tuple[int, int, int, int]


@dataclasses.dataclass(frozen=True, eq=False)
class DomainMask:
    """Boolean cell set representing an open subset of the design rectangle.

    ``active[j, i]`` is True when cell ``(i, j)`` belongs to the domain. The
    array is frozen; edits go through :meth:`with_cells` and return a new mask
    with ``generation`` bumped by one.
    """
    grid: GridSpec
    active: np.ndarray
    generation: int = 0

    def __post_init__(self):
        active = np.array(self.active, dtype=bool)
        if active.shape != self.grid.shape:
            raise InvalidMaskError(f'mask shape {active.shape} does not match grid {self.grid.shape}')
        if not active.any():
            raise InvalidMaskError('active set is empty')
        if (active & self.grid.frame()).any():
            raise InvalidMaskError('frame cells must be inactive')
        active.setflags(write=False)
        object.__setattr__(self, 'active', active)

    def __eq__(self, other):
        if not isinstance(other, DomainMask):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.active, other.active)

    def __hash__(self):
        return hash((self.grid, self.active.tobytes()))

    def __repr__(self):
        return (f'DomainMask({self.grid.nx}x{self.grid.ny}, active={self.n_active}, '
                f'generation={self.generation})')

    # -- construction ---------------------------------------------------

    @classmethod
    def full_interior(cls, grid: GridSpec) -> 'DomainMask':
        return cls(grid, ~grid.frame())

    @classmethod
    def from_blocks(cls, grid: GridSpec, blocks: Iterable[Block]) -> 'DomainMask':
        """Union of half-open index blocks ``(i0, i1, j0, j1)``."""
        active = np.zeros(grid.shape, dtype=bool)
        for i0, i1, j0, j1 in blocks:
            active[j0:j1, i0:i1] = True
        return cls(grid, active)

    def with_cells(self, cells: Sequence[Tuple[int, int]], state: bool) -> 'DomainMask':
        """Return a copy with the listed ``(i, j)`` cells set to ``state``."""
        active = self.active.copy()
        for i, j in cells:
            active[j, i] = state
        return DomainMask(self.grid, active, self.generation + 1)

    def flipped(self, i: int, j: int) -> 'DomainMask':
        return self.with_cells([(i, j)], not self.active[j, i])

    def without_block(self, block: Block) -> 'DomainMask':
        i0, i1, j0, j1 = block
        active = self.active.copy()
        active[j0:j1, i0:i1] = False
        return DomainMask(self.grid, active, self.generation + 1)

    # -- queries --------------------------------------------------------

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    @property
    def complement(self) -> np.ndarray:
        return ~self.active

    def complement_points(self) -> np.ndarray:
        """Cell centers of the complement as an ``(n, 2)`` array."""
        X, Y = self.grid.cell_centers()
        inactive = ~self.active
        return np.column_stack([X[inactive], Y[inactive]])

    def key(self) -> bytes:
        return np.packbits(self.active).tobytes()

    # -- serialization --------------------------------------------------

    def to_text(self) -> str:
        """Header ``nx ny h`` then ``ny`` rows of 0/1, top row (largest y) first."""
        g = self.grid
        header = f'{g.nx} {g.ny} {g.h!r}'
        if g.origin != (0.0, 0.0):
            header += f' {g.origin[0]!r} {g.origin[1]!r}'
        rows = [''.join('1' if a else '0' for a in self.active[j]) for j in range(g.ny - 1, -1, -1)]
        return '\n'.join([header] + rows) + '\n'

    @classmethod
    def from_text(cls, text: str) -> 'DomainMask':
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not lines:
            raise InvalidMaskError('empty mask file')
        head = lines[0].split()
        if len(head) not in (3, 5):
            raise InvalidMaskError(f'mask header must be "nx ny h", got {lines[0]!r}')
        nx, ny, h = int(head[0]), int(head[1]), float(head[2])
        origin = (float(head[3]), float(head[4])) if len(head) == 5 else (0.0, 0.0)
        grid = GridSpec(nx, ny, h, origin)
        rows = lines[1:]
        if len(rows) != ny or any(len(r) != nx or set(r) - {'0', '1'} for r in rows):
            raise InvalidMaskError(f'mask body must be {ny} rows of {nx} characters 0/1')
        active = np.array([[c == '1' for c in r] for r in reversed(rows)], dtype=bool)
        return cls(grid, active)

    def to_json(self) -> str:
        g = self.grid
        rows = [''.join('1' if a else '0' for a in self.active[j]) for j in range(g.ny - 1, -1, -1)]
        return json.dumps({'nx': g.nx, 'ny': g.ny, 'h': g.h, 'origin': list(g.origin), 'rows': rows})

    @classmethod
    def from_json(cls, text: Union[str, dict]) -> 'DomainMask':
        d = json.loads(text) if isinstance(text, str) else text
        grid = GridSpec(int(d['nx']), int(d['ny']), float(d['h']), tuple(d.get('origin', (0.0, 0.0))))
        rows = d['rows']
        if len(rows) != grid.ny:
            raise InvalidMaskError('row count does not match ny')
        active = np.array([[c == '1' for c in r] for r in reversed(rows)], dtype=bool)
        return cls(grid, active)


@dataclasses.dataclass(frozen=True)
class AdmissibleClass:
    """Designs containing ``omega`` whose complement has at most ``max_components`` pieces."""
    omega: DomainMask
    max_components: int

    def __post_init__(self):
        if self.max_components < 1:
            raise ValueError('max_components must be at least 1')

    @property
    def grid(self) -> GridSpec:
        return self.omega.grid


def count_complement_components(mask: DomainMask) -> int:
    """Number of 8-connected components of the inactive cells."""
    _, n = ndimage.label(~mask.active, structure=COMPLEMENT_STRUCTURE)
    return int(n)


def is_admissible(mask: DomainMask, cls: AdmissibleClass) -> bool:
    if mask.grid != cls.grid:
        raise GridMismatchError(f'mask grid {mask.grid} differs from class grid {cls.grid}')
    if not mask.active[cls.omega.active].all():
        return False
    return count_complement_components(mask) <= cls.max_components


def hausdorff_distance(a, b) -> float:
    """Hausdorff distance between two finite point sets in the plane.

    Exact: nearest neighbours come from a k-d tree, not an approximation.
    """
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    if len(a) == 0 or len(b) == 0:
        raise EmptySetError('Hausdorff distance needs two nonempty point sets')
    d_ab = cKDTree(b).query(a)[0].max()
    d_ba = cKDTree(a).query(b)[0].max()
    return float(max(d_ab, d_ba))


def complementary_hausdorff(m1: DomainMask, m2: DomainMask) -> float:
    """Hausdorff distance between the complements of two masks."""
    if m1.grid != m2.grid:
        raise GridMismatchError(f'grids differ: {m1.grid} vs {m2.grid}')
    if np.array_equal(m1.active, m2.active):
        return 0.0
    return hausdorff_distance(m1.complement_points(), m2.complement_points())


def extend_by_zero(mask: DomainMask, values) -> ScalarField:
    """Grid-wide field equal to ``values`` on active cells and zero elsewhere.

    ``values`` is either a vector over the active cells (row-major order, as
    produced by ``grid_values[mask.active]``) or a full grid array.
    """
    values = np.asarray(values, dtype=float)
    out = np.zeros(mask.grid.shape)
    if values.ndim == 1:
        if values.size != mask.n_active:
            raise ValueError(f'expected {mask.n_active} active values, got {values.size}')
        out[mask.active] = values
    else:
        if values.shape != mask.grid.shape:
            raise GridMismatchError(f'field shape {values.shape} does not match grid')
        out[mask.active] = values[mask.active]
    return ScalarField(mask.grid, out, mask.generation)


def stencil_closure(mask: DomainMask) -> np.ndarray:
    """Cells whose forward-difference stencil touches an active cell.

    Gradients of a field extended by zero vanish outside this set, so sums
    over it equal sums over the whole grid.
    """
    a = mask.active
    closure = a.copy()
    closure[:, :-1] |= a[:, 1:]
    closure[:-1, :] |= a[1:, :]
    return closure


def boundary_cells(mask: DomainMask) -> Tuple[np.ndarray, np.ndarray]:
    """Active cells with an inactive 4-neighbour, and inactive non-frame cells with an active one."""
    a = mask.active
    pad = np.pad(a, 1, constant_values=False)
    any_inactive_nb = ~(pad[:-2, 1:-1] & pad[2:, 1:-1] & pad[1:-1, :-2] & pad[1:-1, 2:])
    any_active_nb = pad[:-2, 1:-1] | pad[2:, 1:-1] | pad[1:-1, :-2] | pad[1:-1, 2:]
    inner = a & any_inactive_nb
    outer = ~a & any_active_nb & ~mask.grid.frame()
    return inner, outer
