"""Uniform cell grids, grid functions and their discrete norms.

Arrays are indexed ``values[j, i]`` with ``i`` the column (x) index and ``j``
the row (y) index, so ``values.shape == (ny, nx)``. Cell ``(i, j)`` has its
center at ``origin + ((i + 1/2) h, (j + 1/2) h)``.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from turnpike.errors import GridMismatchError


@dataclasses.dataclass(frozen=True)
class GridSpec:
    """Uniform Cartesian discretization of the design rectangle.

    Attributes:
      nx, ny: cell counts along x and y.
      h: cell side length.
      origin: lower-left corner of the rectangle.
    """
    nx: int
    ny: int
    h: float
    origin: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f'grid needs at least 4x4 cells, got {self.nx}x{self.ny}')
        if not (np.isfinite(self.h) and self.h > 0):
            raise ValueError(f'cell size must be positive, got {self.h}')
        object.__setattr__(self, 'origin', (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def unit_square(cls, n: int) -> 'GridSpec':
        """Node-aligned grid for the unit square with spacing ``1/n``.

        The outer frame of cells is centered on the boundary of [0, 1]^2, so a
        mask whose active set is the full interior carries the Dirichlet
        condition exactly on the square's boundary. The grid has ``n + 1``
        cells per axis.
        """
        h = 1.0 / n
        return cls(n + 1, n + 1, h, (-h / 2, -h / 2))

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def area(self) -> float:
        return self.nx * self.ny * self.h ** 2

    def cell_centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` arrays of cell-center coordinates, shape ``(ny, nx)``."""
        x = self.origin[0] + (np.arange(self.nx) + 0.5) * self.h
        y = self.origin[1] + (np.arange(self.ny) + 0.5) * self.h
        return np.meshgrid(x, y)

    def frame(self) -> np.ndarray:
        """Boolean array marking the outer ring of cells."""
        ring = np.zeros(self.shape, dtype=bool)
        ring[0, :] = ring[-1, :] = ring[:, 0] = ring[:, -1] = True
        return ring

    def to_dict(self) -> dict:
        return {'nx': self.nx, 'ny': self.ny, 'h': self.h, 'origin': list(self.origin)}

    @classmethod
    def from_dict(cls, d: dict) -> 'GridSpec':
        return cls(int(d['nx']), int(d['ny']), float(d['h']), tuple(d.get('origin', (0.0, 0.0))))


def parse_length(text: str) -> float:
    """Parse ``'0.25'`` or ``'1/48'`` into a float."""
    return float(Fraction(text.strip()))


@dataclasses.dataclass(eq=False)
class ScalarField:
    """One real value per cell of a grid.

    Fields defined on a mask carry zeros on the inactive cells, which is the
    discrete Dirichlet condition and the extension by zero at the same time.
    """
    grid: GridSpec
    values: np.ndarray
    mask_id: int = -1

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f'field shape {self.values.shape} does not match grid {self.grid.shape}')
        if not np.all(np.isfinite(self.values)):
            raise ValueError('field values must be finite')

    @classmethod
    def zeros(cls, grid: GridSpec) -> 'ScalarField':
        return cls(grid, np.zeros(grid.shape))

    def __add__(self, other: 'ScalarField') -> 'ScalarField':
        _same_grid(self.grid, other.grid)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: 'ScalarField') -> 'ScalarField':
        _same_grid(self.grid, other.grid)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, alpha: float) -> 'ScalarField':
        return ScalarField(self.grid, alpha * self.values, self.mask_id)

    __rmul__ = __mul__

    def l2_norm(self, region: Optional[np.ndarray] = None) -> float:
        return float(np.sqrt(l2_sq(self.values, self.grid.h, region)))

    def h1_norm(self, region: Optional[np.ndarray] = None) -> float:
        h = self.grid.h
        return float(np.sqrt(l2_sq(self.values, h, region) + grad_sq(self.values, h, region)))

    # -- serialization -------------------------------------------------

    def to_csv(self) -> str:
        """CSV with an ``i,j,value`` header and one row per cell."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator='\n')
        writer.writerow(['i', 'j', 'value'])
        for j in range(self.grid.ny):
            for i in range(self.grid.nx):
                writer.writerow([i, j, repr(float(self.values[j, i]))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, grid: GridSpec) -> 'ScalarField':
        values = np.zeros(grid.shape)
        seen = np.zeros(grid.shape, dtype=bool)
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if [c.strip() for c in header] != ['i', 'j', 'value']:
            raise ValueError(f'bad field CSV header: {header}')
        for row in reader:
            if not row:
                continue
            i, j, v = int(row[0]), int(row[1]), float(row[2])
            if not (0 <= i < grid.nx and 0 <= j < grid.ny):
                raise ValueError(f'cell ({i}, {j}) outside the grid')
            values[j, i] = v
            seen[j, i] = True
        if not seen.all():
            raise ValueError('field CSV does not cover every cell')
        return cls(grid, values)

    def to_json(self) -> str:
        return json.dumps({'grid': self.grid.to_dict(), 'mask_id': self.mask_id,
                           'values': self.values.tolist()})

    @classmethod
    def from_json(cls, text: str) -> 'ScalarField':
        d = json.loads(text)
        return cls(GridSpec.from_dict(d['grid']), np.array(d['values'], dtype=float),
                   int(d.get('mask_id', -1)))


def _same_grid(a: GridSpec, b: GridSpec):
    if a != b:
        raise GridMismatchError(f'grids differ: {a} vs {b}')


def forward_gradient(values: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """Forward differences, treating everything beyond the grid as zero."""
    gx = -values.copy()
    gx[..., :, :-1] += values[..., :, 1:]
    gy = -values.copy()
    gy[..., :-1, :] += values[..., 1:, :]
    return gx / h, gy / h


def l2_sq(values: np.ndarray, h: float, region: Optional[np.ndarray] = None) -> float:
    """``sum h^2 |u|^2`` over ``region`` (whole grid when ``None``)."""
    v = values if region is None else values[region]
    return float(h * h * np.sum(v * v))


def grad_sq(values: np.ndarray, h: float, region: Optional[np.ndarray] = None) -> float:
    """``sum h^2 |grad_h u|^2`` over ``region`` with forward differences."""
    gx, gy = forward_gradient(values, h)
    g2 = gx * gx + gy * gy
    if region is not None:
        g2 = g2[region]
    return float(h * h * np.sum(g2))
