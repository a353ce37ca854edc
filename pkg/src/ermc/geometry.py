"""Cartesian grids, boundary conditions and the coarsening hierarchy.

Cell indices are 0-based ``(i, j, k)`` along ``(x, y, z)``; cell ``i`` spans
``[origin + i*dx, origin + (i+1)*dx)``.  Fields are arrays of shape
``(nx, ny, nz)`` and the linear cell id is ``(i*ny + j)*nz + k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numba as nb
import numpy as np

# points closer than this (in cell widths) to a face count as on the face
FACE_TOL = 1e-9


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class CartesianGrid:
    nx: int
    ny: int
    nz: int
    dx: float
    dy: float
    dz: float
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise GeometryError(f"cell counts must be >= 1, got {self.shape}")
        if min(self.dx, self.dy, self.dz) <= 0.0:
            raise GeometryError("cell spacings must be positive")
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(3))

    @classmethod
    def box(cls, shape, lengths=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)):
        nx, ny, nz = shape
        lx, ly, lz = lengths
        return cls(nx, ny, nz, lx / nx, ly / ny, lz / nz, np.asarray(origin, dtype=float))

    @property
    def shape(self):
        return (self.nx, self.ny, self.nz)

    @property
    def spacing(self):
        return np.array([self.dx, self.dy, self.dz])

    @property
    def lengths(self):
        return np.array(self.shape) * self.spacing

    @property
    def n_cells(self):
        return self.nx * self.ny * self.nz

    @property
    def cell_volume(self):
        return self.dx * self.dy * self.dz

    def linear_index(self, i, j, k):
        return (i * self.ny + j) * self.nz + k

    def unravel(self, cell_id):
        return np.unravel_index(cell_id, self.shape)

    def centers(self, axis):
        return self.origin[axis] + (np.arange(self.shape[axis]) + 0.5) * self.spacing[axis]


@dataclass(frozen=True)
class Wall:
    T: float
    eps: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise GeometryError(f"wall emissivity must lie in [0, 1], got {self.eps}")
        if self.T < 0.0:
            raise GeometryError(f"wall temperature must be >= 0 K, got {self.T}")


@dataclass(frozen=True)
class AxisBoundary:
    """Either periodic, or a pair of walls (low face, high face)."""

    periodic: bool = False
    low: Wall | None = None
    high: Wall | None = None

    def __post_init__(self):
        if self.periodic and (self.low is not None or self.high is not None):
            raise GeometryError("a periodic axis cannot carry walls")
        if not self.periodic and (self.low is None or self.high is None):
            raise GeometryError("a walled axis needs a wall on both faces")


PERIODIC = AxisBoundary(periodic=True)


def walls(low, high=None):
    return AxisBoundary(low=low, high=low if high is None else high)


@dataclass(frozen=True)
class BoundarySpec:
    x: AxisBoundary
    y: AxisBoundary
    z: AxisBoundary

    @property
    def axes(self):
        return (self.x, self.y, self.z)

    @classmethod
    def enclosure(cls, T, eps=1.0):
        w = walls(Wall(T, eps))
        return cls(w, w, w)

    @classmethod
    def slab(cls, T1, T2, eps1=1.0, eps2=1.0):
        """Walls normal to x, periodic in y and z."""
        return cls(walls(Wall(T1, eps1), Wall(T2, eps2)), PERIODIC, PERIODIC)

    def wall_temperatures(self):
        return [w.T for a in self.axes if not a.periodic for w in (a.low, a.high)]

    def arrays(self):
        """``(periodic[3], wall_T[3, 2], wall_eps[3, 2])`` for the kernels."""
        periodic = np.array([a.periodic for a in self.axes])
        wall_T = np.zeros((3, 2))
        wall_eps = np.zeros((3, 2))
        for ax, a in enumerate(self.axes):
            if not a.periodic:
                wall_T[ax] = a.low.T, a.high.T
                wall_eps[ax] = a.low.eps, a.high.eps
        return periodic, wall_T, wall_eps


class CellIndex(NamedTuple):
    i: int
    j: int
    k: int
    level: int = 0


def restrict_field(fine, ratio):
    """Block mean over ``ratio**3`` children; partial edge blocks use what exists.

    Uniform blocks reproduce their value exactly.
    """
    fine = np.asarray(fine, dtype=float)
    out_sum, out_cnt, out_min, out_max = fine, np.ones_like(fine), fine, fine
    for axis in range(3):
        starts = np.arange(0, fine.shape[axis], ratio)
        out_sum = np.add.reduceat(out_sum, starts, axis=axis)
        out_cnt = np.add.reduceat(out_cnt, starts, axis=axis)
        out_min = np.minimum.reduceat(out_min, starts, axis=axis)
        out_max = np.maximum.reduceat(out_max, starts, axis=axis)
    mean = out_sum / out_cnt
    mean = np.clip(mean, out_min, out_max)
    return np.where(out_min == out_max, out_min, mean)


def coarsen_grid(grid, ratio):
    shape = [max(1, -(-n // ratio)) for n in grid.shape]
    spacing = grid.lengths / np.array(shape)
    return CartesianGrid(*shape, *spacing, origin=grid.origin.copy())


@dataclass(frozen=True)
class GridHierarchy:
    grids: list
    fields: list
    ratio: int
    steps_per_level: int

    @property
    def n_levels(self):
        return len(self.grids)

    @property
    def fine(self):
        return self.grids[0]


def max_levels(grid, ratio):
    """Number of distinct levels reachable before every axis has one cell."""
    n, depth = max(grid.shape), 1
    while n > 1:
        n = -(-n // ratio)
        depth += 1
    return depth


def build_hierarchy(grid, field, n_levels=1, ratio=2, steps_per_level=5):
    field = np.asarray(field, dtype=float)
    if field.shape != grid.shape:
        raise GeometryError(f"field shape {field.shape} != grid shape {grid.shape}")
    if n_levels < 1:
        raise GeometryError("n_levels must be >= 1")
    if ratio < 2:
        raise GeometryError("coarsening ratio must be >= 2")
    if steps_per_level < 1:
        raise GeometryError("steps_per_level must be >= 1")
    depth = max_levels(grid, ratio)
    if n_levels > depth:
        raise GeometryError(
            f"{n_levels} levels requested but grid {grid.shape} with ratio {ratio} "
            f"supports at most {depth}"
        )
    grids, fields = [grid], [field]
    for _ in range(n_levels - 1):
        grids.append(coarsen_grid(grids[-1], ratio))
        fields.append(restrict_field(fields[-1], ratio))
    return GridHierarchy(grids, fields, ratio, steps_per_level)


@nb.njit(cache=True, nogil=True, error_model="numpy")
def _locate_axis(p, origin, d, n, direction):
    u = (p - origin) / d
    r = math.floor(u + 0.5)
    if abs(u - r) <= FACE_TOL:
        idx = int(r) - 1 if direction < 0.0 else int(r)
    else:
        idx = int(math.floor(u))
    if idx < 0:
        idx = 0
    if idx > n - 1:
        idx = n - 1
    return idx


def locate(point, grid, direction=None, level=0, periodic=(False, False, False)):
    """Cell containing ``point``; on-face points go to the cell ``direction`` enters."""
    point = np.asarray(point, dtype=float).copy()
    direction = np.zeros(3) if direction is None else np.asarray(direction, dtype=float)
    lengths = grid.lengths
    for a in range(3):
        rel = point[a] - grid.origin[a]
        if periodic[a]:
            point[a] = grid.origin[a] + rel % lengths[a]
        elif rel < -FACE_TOL * grid.spacing[a] or rel > lengths[a] + FACE_TOL * grid.spacing[a]:
            raise GeometryError(f"point {point} lies outside the walled domain along axis {a}")
    idx = [
        _locate_axis(point[a], grid.origin[a], grid.spacing[a], grid.shape[a], direction[a])
        for a in range(3)
    ]
    return CellIndex(*idx, level)


@nb.njit(cache=True, nogil=True, error_model="numpy")
def _face_distances(pos, direc, idx, origin, spacing, out):
    """Fill ``out`` with per-axis face distances; return ``(ds, axis)``.

    Ties resolve to the lowest axis.  Slightly negative distances from
    round-off are clamped to zero.
    """
    ds = np.inf
    axis = 0
    for a in range(3):
        da = direc[a]
        if da > 0.0:
            df = (origin[a] + (idx[a] + 1) * spacing[a] - pos[a]) / da
        elif da < 0.0:
            df = (origin[a] + idx[a] * spacing[a] - pos[a]) / da
        else:
            df = np.inf
        if df < 0.0:
            df = 0.0
        out[a] = df
        if df < ds:
            ds = df
            axis = a
    return ds, axis


def face_distances(pos, direction, cell, grid):
    """Return ``(df_x, df_y, df_z, ds, crossed_axis)`` for a ray inside ``cell``."""
    out = np.empty(3)
    idx = np.array(cell[:3], dtype=np.int64)
    ds, axis = _face_distances(
        np.asarray(pos, dtype=float), np.asarray(direction, dtype=float), idx,
        grid.origin, grid.spacing, out,
    )
    return out[0], out[1], out[2], ds, int(axis)
