"""Ray marching with reciprocal (ERMC) exchange accumulation.

Sign convention: the accumulated radiative power is *absorbed minus emitted*
(the energy-equation source term), so a hot cell in cold surroundings gets a
negative value.  Each segment adds ``QE * tau * alpha * (Ib2/Ib1 - 1) * R_I``,
computed as ``QE * k1/(k_max*Ib_max) * tau * alpha * (Ib2 - Ib1)`` which is the
same quantity without dividing by a possibly vanishing ``Ib1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numba as nb
import numpy as np

from .geometry import _locate_axis
from .sampling import (
    DRAW_BAND, DRAW_PHI, DRAW_POS, DRAW_QUAD, DRAW_THETA,
    _band_index, _direction, _prefactor, uniform_draw,
)
from .spectral import lerp, temp_index

TERM_TOLERANCE, TERM_WALL, TERM_STEP_CAP = 0, 1, 2
TERMINATIONS = {TERM_TOLERANCE: "tolerance", TERM_WALL: "wall_absorbed", TERM_STEP_CAP: "step_cap"}


class MarchError(RuntimeError):
    pass


def absorptivity(kappa, ds):
    """Fraction absorbed over a homogeneous segment, ``1 - exp(-kappa*ds)``."""
    if kappa < 0.0 or ds < 0.0:
        raise ValueError("kappa and ds must be non-negative")
    return -math.expm1(-kappa * ds)


class KernelContext(NamedTuple):
    """Flat read-only arrays shared by every ray of a solve."""

    k_table: np.ndarray
    ib_table: np.ndarray
    band_cdf: np.ndarray
    quad_cdf: np.ndarray
    tmax_i: int
    tmax_w: float
    dims: np.ndarray
    spacing: np.ndarray
    origin: np.ndarray
    offsets: np.ndarray
    cell_ti: np.ndarray
    cell_tw: np.ndarray
    periodic: np.ndarray
    wall_eps: np.ndarray
    wall_ti: np.ndarray
    wall_tw: np.ndarray
    steps_per_level: int
    max_steps: int
    tol: float
    specular: bool


def build_context(hierarchy, model, boundary, cdfs, tol=1e-4, max_steps=100_000, specular=False):
    model.check_temperature(np.concatenate([f.ravel() for f in hierarchy.fields]), "field temperature")
    model.check_temperature(boundary.wall_temperatures(), "wall temperature")
    model.check_temperature(cdfs.t_max, "T_max")
    grids = hierarchy.grids
    dims = np.array([g.shape for g in grids], dtype=np.int64)
    spacing = np.array([g.spacing for g in grids])
    offsets = np.zeros(len(grids) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([g.n_cells for g in grids])
    temps = np.concatenate([np.ascontiguousarray(f).ravel() for f in hierarchy.fields])
    ti, tw = _temp_indices(model.temp_grid, temps)
    periodic, wall_T, wall_eps = boundary.arrays()
    wti, wtw = _temp_indices(model.temp_grid, wall_T.ravel())
    for a in range(3):
        if periodic[a]:
            wti[2 * a: 2 * a + 2] = 0
            wtw[2 * a: 2 * a + 2] = 0.0
    mi, mw = temp_index(model.temp_grid, float(cdfs.t_max))
    return KernelContext(
        model.k_table, model.ib_table, cdfs.band_cdf, cdfs.quad_cdf, int(mi), float(mw),
        dims, spacing, grids[0].origin.astype(float), offsets, ti, tw, periodic, wall_eps,
        wti.reshape(3, 2), wtw.reshape(3, 2), int(hierarchy.steps_per_level),
        int(max_steps), float(tol), bool(specular),
    )


@nb.njit(cache=True, nogil=True, error_model="numpy")
def _temp_indices(temp_grid, temps):
    ti = np.empty(temps.size, dtype=np.int64)
    tw = np.empty(temps.size)
    for c in range(temps.size):
        ti[c], tw[c] = temp_index(temp_grid, temps[c])
    return ti, tw


@nb.njit(cache=True, nogil=True, error_model="numpy")
def _march_ray(
    pos, direc, idx, n, g, ib1, weight, seed, cell_id, ray_id, draw,
    k_table, ib_table, dims, spacing, origin, offsets, cell_ti, cell_tw,
    periodic, wall_eps, wall_ti, wall_tw, steps_per_level, max_steps, tol, specular,
    steps_lvl,
):
    """March one ray from level 0.  ``pos``, ``direc``, ``idx`` are updated in place.

    Returns ``(q, steps, termination, balance, reflections, next_draw, tau)``
    where ``balance`` is the emitted weight accounted for (absorbed + dumped)
    and ``tau`` the transmissivity left before the residual dump.
    """
    n_levels = dims.shape[0]
    k_row = k_table[n, g]
    ib_row = ib_table[n]
    tau = 1.0
    q = 0.0
    bal = 0.0
    ib2 = ib1
    level = 0
    sl = 0
    steps = 0
    refl = 0
    term = TERM_TOLERANCE
    inv = np.empty(3)
    for a in range(3):
        inv[a] = 1.0 / direc[a] if direc[a] != 0.0 else np.inf
    ny = dims[0, 1]
    nz = dims[0, 2]
    off = offsets[0]
    sp = spacing[0]
    while True:
        if tau <= tol:
            term = TERM_TOLERANCE
            break
        if steps >= max_steps:
            term = TERM_STEP_CAP
            break
        if sl >= steps_per_level and level < n_levels - 1:
            level += 1
            sl = 0
            sp = spacing[level]
            ny = dims[level, 1]
            nz = dims[level, 2]
            off = offsets[level]
            for a in range(3):
                idx[a] = _locate_axis(pos[a], origin[a], sp[a], dims[level, a], direc[a])
        # distance to the exit face along each axis; ties go to the lowest axis
        ds = np.inf
        a = 0
        for b in range(3):
            db = direc[b]
            if db > 0.0:
                df = (origin[b] + (idx[b] + 1) * sp[b] - pos[b]) * inv[b]
            elif db < 0.0:
                df = (origin[b] + idx[b] * sp[b] - pos[b]) * inv[b]
            else:
                continue
            if df < ds:
                ds = df
                a = b
        if ds < 0.0:
            ds = 0.0
        flat = off + (idx[0] * ny + idx[1]) * nz + idx[2]
        ti = cell_ti[flat]
        tw = cell_tw[flat]
        kap = (1.0 - tw) * k_row[ti] + tw * k_row[ti + 1]
        alpha = -math.expm1(-kap * ds)
        ib2 = (1.0 - tw) * ib_row[ti] + tw * ib_row[ti + 1]
        q += weight * tau * alpha * (ib2 - ib1)
        bal += tau * alpha
        tau *= 1.0 - alpha
        pos[0] += ds * direc[0]
        pos[1] += ds * direc[1]
        pos[2] += ds * direc[2]
        steps += 1
        sl += 1
        steps_lvl[level] += 1

        step = 1 if direc[a] > 0.0 else -1
        new = idx[a] + step
        na = dims[level, a]
        pos[a] = origin[a] + (idx[a] + (1 if step > 0 else 0)) * sp[a]
        if 0 <= new < na:
            idx[a] = new
        elif periodic[a]:
            if step > 0:
                idx[a] = 0
                pos[a] = origin[a]
            else:
                idx[a] = na - 1
                pos[a] = origin[a] + na * sp[a]
        else:
            side = 1 if step > 0 else 0
            eps = wall_eps[a, side]
            wi = wall_ti[a, side]
            ibw = lerp(ib_row[wi], ib_row[wi + 1], wall_tw[a, side])
            q += weight * tau * eps * (ibw - ib1)
            bal += tau * eps
            tau *= 1.0 - eps
            ib2 = ibw
            if tau <= tol:
                term = TERM_WALL
                break
            if specular:
                direc[a] = -direc[a]
            else:
                r1 = uniform_draw(seed, cell_id, ray_id, draw)
                r2 = uniform_draw(seed, cell_id, ray_id, draw + 1)
                draw += 2
                cos_t = math.sqrt(1.0 - r1)
                sin_t = math.sqrt(r1)
                phi = 2.0 * math.pi * r2
                b = (a + 1) % 3
                c = (a + 2) % 3
                direc[a] = -step * cos_t
                direc[b] = sin_t * math.cos(phi)
                direc[c] = sin_t * math.sin(phi)
            for b in range(3):
                inv[b] = 1.0 / direc[b] if direc[b] != 0.0 else np.inf
            refl += 1
    # residual energy goes back against the last blackbody intensity seen
    q += weight * tau * (ib2 - ib1)
    bal += tau
    return q, steps, term, bal, refl, draw, tau


@nb.njit(cache=True, nogil=True, error_model="numpy")
def _trace_cells(
    cells, n_rays, seed, sorting, volume_sampling, qe,
    k_table, ib_table, band_cdf, quad_cdf, tmax_i, tmax_w,
    dims, spacing, origin, offsets, cell_ti, cell_tw,
    periodic, wall_eps, wall_ti, wall_tw, steps_per_level, max_steps, tol, specular,
    q_out, se_out, steps_out, err_out,
):
    """Trace every ray of the fine cells listed in ``cells``.

    Per-ray contributions are stored by ray id and reduced in ray-id order, so
    the marching order (sorted or not) never changes the floating-point sum.
    """
    ny = dims[0, 1]
    nz = dims[0, 2]
    contrib = np.empty(n_rays)
    k_sort = np.empty(n_rays)
    order = np.arange(n_rays)
    pos = np.empty(3)
    direc = np.empty(3)
    idx = np.empty(3, dtype=np.int64)
    steps_lvl = np.zeros(dims.shape[0], dtype=np.int64)
    for cell in cells:
        i = cell // (ny * nz)
        j = (cell // nz) % ny
        k = cell % nz
        ti = cell_ti[cell]
        tw = cell_tw[cell]
        if sorting:
            for r in range(n_rays):
                nn, gg = _band_index(
                    band_cdf, quad_cdf,
                    uniform_draw(seed, cell, r, DRAW_BAND), uniform_draw(seed, cell, r, DRAW_QUAD),
                )
                k_sort[r] = lerp(k_table[nn, gg, tmax_i], k_table[nn, gg, tmax_i + 1], tmax_w)
            order = np.argsort(k_sort, kind="mergesort")
        steps_lvl[:] = 0
        for rr in range(n_rays):
            r = order[rr]
            dx, dy, dz = _direction(
                uniform_draw(seed, cell, r, DRAW_THETA), uniform_draw(seed, cell, r, DRAW_PHI)
            )
            direc[0] = dx
            direc[1] = dy
            direc[2] = dz
            nn, gg = _band_index(
                band_cdf, quad_cdf,
                uniform_draw(seed, cell, r, DRAW_BAND), uniform_draw(seed, cell, r, DRAW_QUAD),
            )
            draw = 4
            idx[0] = i
            idx[1] = j
            idx[2] = k
            if volume_sampling:
                for a in range(3):
                    pos[a] = origin[a] + (idx[a] + uniform_draw(seed, cell, r, DRAW_POS + a)) * spacing[0, a]
                draw = 7
            else:
                for a in range(3):
                    pos[a] = origin[a] + (idx[a] + 0.5) * spacing[0, a]
            ib1, k1, r_i = _prefactor(k_table, ib_table, nn, gg, ti, tw, tmax_i, tmax_w)
            if not (r_i == r_i):
                err_out[cell, 0] = r
                err_out[cell, 1] = -1
                contrib[r] = 0.0
                continue
            kmax = lerp(k_table[nn, gg, tmax_i], k_table[nn, gg, tmax_i + 1], tmax_w)
            ibmax = lerp(ib_table[nn, tmax_i], ib_table[nn, tmax_i + 1], tmax_w)
            weight = qe * k1 / (kmax * ibmax)
            q, steps, term, bal, refl, draw, _ = _march_ray(
                pos, direc, idx, nn, gg, ib1, weight, seed, cell, r, draw,
                k_table, ib_table, dims, spacing, origin, offsets, cell_ti, cell_tw,
                periodic, wall_eps, wall_ti, wall_tw, steps_per_level, max_steps, tol, specular,
                steps_lvl,
            )
            if not math.isfinite(q):
                err_out[cell, 0] = r
                err_out[cell, 1] = steps
            contrib[r] = q
        total = 0.0
        mean = 0.0
        m2 = 0.0
        for r in range(n_rays):
            c = contrib[r]
            total += c
            delta = c - mean
            mean += delta / (r + 1)
            m2 += delta * (c - mean)
        q_out[cell] = total
        if n_rays > 1:
            se_out[cell] = math.sqrt(n_rays * m2 / (n_rays - 1))
        else:
            se_out[cell] = 0.0
        for lv in range(dims.shape[0]):
            steps_out[cell, lv] = steps_lvl[lv]


@dataclass
class MarchResult:
    q_contribution: float
    sum_sq_contribution: float
    steps: int
    steps_per_level: np.ndarray
    terminated_by: str
    reflections: int
    energy_balance: float


def march(ray, hierarchy, model, boundary, cdfs, qe, tol=1e-4, max_steps=100_000, specular=False):
    """March an initialised :class:`~ermc.sampling.RayState` and return its contribution.

    ``qe`` is the per-ray emission weight ``4 kappa_p(T_max) sigma T_max^4 / N_rays``.
    The ray state is advanced in place.
    """
    ctx = build_context(hierarchy, model, boundary, cdfs, tol, max_steps, specular)
    weight = qe * ray.k1 / ray.k_tmax_ib_tmax
    pos = np.array(ray.pos, dtype=float)
    direc = np.array(ray.dir, dtype=float)
    idx = np.array(ray.cell, dtype=np.int64)
    steps_lvl = np.zeros(hierarchy.n_levels, dtype=np.int64)
    q, steps, term, bal, refl, draw, tau = _march_ray(
        pos, direc, idx, ray.n, ray.g, ray.Ib1, weight, ray.seed, ray.cell_id, ray.ray_id,
        ray.next_draw, ctx.k_table, ctx.ib_table, ctx.dims, ctx.spacing, ctx.origin, ctx.offsets,
        ctx.cell_ti, ctx.cell_tw, ctx.periodic, ctx.wall_eps, ctx.wall_ti, ctx.wall_tw,
        ctx.steps_per_level, ctx.max_steps, ctx.tol, ctx.specular, steps_lvl,
    )
    if not math.isfinite(q):
        raise MarchError(
            f"non-finite contribution for cell {ray.cell} ray {ray.ray_id} after {steps} steps"
        )
    ray.pos, ray.dir = pos, direc
    ray.cell, ray.level = tuple(int(v) for v in idx), int(np.flatnonzero(steps_lvl)[-1]) if steps else 0
    ray.transmissivity = float(tau)
    ray.steps_taken = int(steps)
    ray.reflections = int(refl)
    ray.next_draw = int(draw)
    return MarchResult(q, q * q, int(steps), steps_lvl, TERMINATIONS[term], int(refl), bal)


def wall_interact(ray, wall, model, qe, tol=1e-4):
    """Exchange with a wall and attenuate; returns ``(increment, absorbed)``.

    ``absorbed`` is True when the remaining transmissivity drops to ``tol`` or
    below.  Reflection direction is chosen inside :func:`march`.
    """
    model.check_temperature(wall.T, "wall temperature")
    i, w = temp_index(model.temp_grid, float(wall.T))
    ibw = lerp(model.ib_table[ray.n, i], model.ib_table[ray.n, i + 1], w)
    weight = qe * ray.k1 / ray.k_tmax_ib_tmax
    inc = weight * ray.transmissivity * wall.eps * (ibw - ray.Ib1)
    ray.transmissivity *= 1.0 - wall.eps
    if ray.transmissivity > tol:
        ray.reflections += 1
    return inc, ray.transmissivity <= tol
