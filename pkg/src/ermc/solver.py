"""Full ERMC solve over a Cartesian grid.

Cells are split into contiguous blocks of the linear index and traced by a
thread pool running a GIL-free kernel; every cell writes only its own output
slots, so results do not depend on the worker count.
"""
from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import build_hierarchy
from .sampling import DRAW_BAND, DRAW_QUAD, _band_index, uniform_draw
from .spectral import SIGMA, build_cdfs, interp_k, planck_mean
from .tracer import _trace_cells, build_context

log = logging.getLogger(__name__)


class SolveError(ValueError):
    pass


@dataclass
class SolveConfig:
    rays_per_cell: int = 2000
    tolerance: float = 1e-4
    seed: int = 0
    sorting: bool = False
    n_levels: int = 1
    ratio: int = 2
    steps_per_level: int = 5
    max_steps: int = 100_000
    volume_sampling: bool = False
    specular_walls: bool = False
    workers: int = 0

    def validate(self):
        if self.rays_per_cell < 1:
            raise SolveError("rays_per_cell must be >= 1")
        if not 0.0 < self.tolerance < 1.0:
            raise SolveError("tolerance must lie in (0, 1)")
        if self.n_levels < 1:
            raise SolveError("n_levels must be >= 1")
        if self.max_steps < 1:
            raise SolveError("max_steps must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise SolveError("seed must be an unsigned 64-bit integer")
        if self.workers < 0:
            raise SolveError("workers must be >= 0 (0 = one per CPU)")

    def to_dict(self):
        return asdict(self)


@dataclass
class SolutionField:
    q_r: np.ndarray
    std_dev: np.ndarray
    steps: np.ndarray
    wall_time: float = 0.0
    t_max: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def steps_per_level(self):
        return self.steps.reshape(-1, self.steps.shape[-1]).sum(axis=0)

    @property
    def total_steps(self):
        return int(self.steps.sum())


def sampling_t_max(field, boundary):
    """Hottest emitter: medium or wall."""
    return float(max(np.max(field), *boundary.wall_temperatures(), 0.0))


def _blocks(cells, workers):
    n_chunks = min(cells.size, max(1, 4 * workers))
    return [b for b in np.array_split(cells, n_chunks) if b.size]


def solve(grid, field, boundary, model, config=None, cells=None):
    """Radiative power (absorbed minus emitted, W/m^3) in every cell of ``grid``.

    ``cells`` optionally restricts the work to a subset of linear cell ids;
    each cell's estimate depends only on its own rays, so a subset gives the
    same values as the full run there.  Cells not traced are NaN.
    """
    config = SolveConfig() if config is None else config
    config.validate()
    field = np.ascontiguousarray(field, dtype=float)
    if field.shape != grid.shape:
        raise SolveError(f"field shape {field.shape} != grid shape {grid.shape}")
    if np.any(field <= 0.0):
        raise SolveError("medium temperatures must be positive")
    t_max = sampling_t_max(field, boundary)
    model.check_temperature(field, "field temperature")
    model.check_temperature(boundary.wall_temperatures(), "wall temperature")
    hierarchy = build_hierarchy(grid, field, config.n_levels, config.ratio, config.steps_per_level)
    cdfs = build_cdfs(model, t_max)
    ctx = build_context(
        hierarchy, model, boundary, cdfs, config.tolerance, config.max_steps, config.specular_walls
    )
    qe = 4.0 * planck_mean(model, t_max) * SIGMA * t_max**4 / config.rays_per_cell

    n_cells = grid.n_cells
    if cells is None:
        cells = np.arange(n_cells, dtype=np.int64)
    else:
        cells = np.unique(np.asarray(cells, dtype=np.int64))
        if cells.size == 0 or cells[0] < 0 or cells[-1] >= n_cells:
            raise SolveError(f"cell ids must lie in [0, {n_cells})")
    q = np.full(n_cells, np.nan)
    se = np.full(n_cells, np.nan)
    steps = np.zeros((n_cells, hierarchy.n_levels), dtype=np.int64)
    err = np.full((n_cells, 2), -2, dtype=np.int64)
    workers = config.workers or os.cpu_count() or 1

    def run(block):
        _trace_cells(
            block, config.rays_per_cell, np.uint64(config.seed), config.sorting,
            config.volume_sampling, qe, *ctx, q, se, steps, err,
        )

    t0 = time.perf_counter()
    blocks = _blocks(cells, workers)
    if workers == 1:
        for b in blocks:
            run(b)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, blocks))
    wall = time.perf_counter() - t0

    bad = np.flatnonzero(err[:, 0] != -2)
    if bad.size:
        c = int(bad[0])
        ray, step = err[c]
        where = f"cell {tuple(int(v) for v in grid.unravel(c))} ray {ray}"
        if step == -1:
            raise SolveError(f"{where}: sampled a spectral point with zero emission at T_max")
        raise SolveError(f"{where}: non-finite contribution after {step} steps")
    log.debug("solved %d cells x %d rays in %.2f s", cells.size, config.rays_per_cell, wall)
    return SolutionField(
        q.reshape(grid.shape), se.reshape(grid.shape), steps.reshape(*grid.shape, -1),
        wall, t_max, {"qe": qe, "workers": workers},
    )


@dataclass
class SortedRayPlan:
    ray_ids: np.ndarray
    n: np.ndarray
    g: np.ndarray
    k_sort: np.ndarray


def presample_and_sort(cell_id, n_rays, cdfs, model, seed):
    """Spectral indices of every ray in a cell, ordered by ascending k at T_max.

    Uses the same keyed draws (ids 2 and 3) as the unsorted path; ties keep
    ray-id order.
    """
    n = np.empty(n_rays, dtype=np.int64)
    g = np.empty(n_rays, dtype=np.int64)
    k = np.empty(n_rays)
    for r in range(n_rays):
        n[r], g[r] = _band_index(
            cdfs.band_cdf, cdfs.quad_cdf,
            uniform_draw(seed, cell_id, r, DRAW_BAND), uniform_draw(seed, cell_id, r, DRAW_QUAD),
        )
        k[r] = interp_k(model, n[r], g[r], cdfs.t_max)
    order = np.argsort(k, kind="stable")
    return SortedRayPlan(order, n[order], g[order], k[order])


@dataclass
class StepCensus:
    total_steps: int
    steps_per_level: np.ndarray
    saved_ratio: float | None = None

    def rows(self):
        return [(lv, int(s)) for lv, s in enumerate(self.steps_per_level)]


def step_census(solution, baseline=None):
    """Marching-step counts; ``saved_ratio`` = baseline steps / these steps."""
    ratio = None
    if baseline is not None:
        ratio = baseline.total_steps / solution.total_steps
    return StepCensus(solution.total_steps, solution.steps_per_level, ratio)
