"""Counter-based random draws and inversion of the ray sampling relations.

Every uniform variate is a pure function of ``(seed, cell_id, ray_id,
draw_id)``: the key is fed through Philox4x64-10 (counter = ``(draw_id,
ray_id, cell_id, 0)``, key = ``(seed, 0)``), and the first output word is
mapped to a 53-bit double in [0, 1).  Rays therefore draw the same numbers
whatever order, thread or sorting plan they are traced in.

Draw ids per ray: 0 polar angle, 1 azimuth, 2 band, 3 quadrature point,
then 4, 5, 6 for the start position when volume sampling is on, then two
per wall reflection.

Direction convention: ``dir = (sin t cos p, sin t sin p, cos t)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .spectral import lerp, temp_index

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_TWO_M53 = 1.0 / 9007199254740992.0

DRAW_THETA, DRAW_PHI, DRAW_BAND, DRAW_QUAD = 0, 1, 2, 3
DRAW_POS = 4  # 4, 5, 6 when volume sampling is on


@nb.njit(cache=True, nogil=True, error_model="numpy")
def _mulhilo(a, b):
    a_lo = a & _LO32
    a_hi = a >> _S32
    b_lo = b & _LO32
    b_hi = b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = (ll >> _S32) + (lh & _LO32) + (hl & _LO32)
    hi = hh + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)
    lo = a * b
    return hi, lo


@nb.njit(cache=True, nogil=True, error_model="numpy")
def philox4x64(c0, c1, c2, c3, k0, k1):
    """Philox4x64 with 10 rounds; all arguments ``np.uint64``."""
    for r in range(10):
        if r > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@nb.njit(cache=True, nogil=True, error_model="numpy")
def uniform_draw(seed, cell_id, ray_id, draw_id):
    x, _, _, _ = philox4x64(
        np.uint64(draw_id), np.uint64(ray_id), np.uint64(cell_id), np.uint64(0),
        np.uint64(seed), np.uint64(0),
    )
    return float(x >> _S11) * _TWO_M53


@dataclass(frozen=True)
class RandomKey:
    seed: int
    cell_id: int
    ray_id: int
    draw_id: int


def uniform(key):
    """Uniform [0, 1) variate for a :class:`RandomKey`."""
    return uniform_draw(key.seed, key.cell_id, key.ray_id, key.draw_id)


@nb.njit(cache=True, nogil=True, error_model="numpy")
def uniform_block(seed, cell_ids, ray_ids, draw_ids):
    out = np.empty(cell_ids.size)
    for i in range(cell_ids.size):
        out[i] = uniform_draw(seed, cell_ids[i], ray_ids[i], draw_ids[i])
    return out


@nb.njit(cache=True, nogil=True, error_model="numpy")
def _direction(r_theta, r_phi):
    cos_t = 1.0 - 2.0 * r_theta
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    phi = 2.0 * math.pi * r_phi
    return sin_t * math.cos(phi), sin_t * math.sin(phi), cos_t


def sample_direction(r_theta, r_phi):
    """Isotropic direction from two uniforms; returns ``(dir, theta, phi)``."""
    d = np.array(_direction(r_theta, r_phi))
    return d, math.acos(1.0 - 2.0 * r_theta), 2.0 * math.pi * r_phi


@nb.njit(cache=True, nogil=True, error_model="numpy")
def _search_cdf(cdf, r):
    # smallest index with cdf[i] > r
    lo, hi = 0, cdf.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cdf[mid] > r:
            hi = mid
        else:
            lo = mid + 1
    return lo


@nb.njit(cache=True, nogil=True, error_model="numpy")
def _band_index(band_cdf, quad_cdf, r_n, r_g):
    n = _search_cdf(band_cdf, r_n)
    g = _search_cdf(quad_cdf[n], r_g)
    return n, g


def sample_band(r_n, r_g, cdfs):
    """Band and quadrature-point indices (0-based) from two uniforms."""
    n, g = _band_index(cdfs.band_cdf, cdfs.quad_cdf, r_n, r_g)
    return int(n), int(g)


@nb.njit(cache=True, nogil=True, error_model="numpy")
def _prefactor(k_table, ib_table, n, g, t_i, t_w, tmax_i, tmax_w):
    """Return ``(Ib1, k1, R_I)``; R_I is NaN when k at T_max is zero."""
    k1 = lerp(k_table[n, g, t_i], k_table[n, g, t_i + 1], t_w)
    ib1 = lerp(ib_table[n, t_i], ib_table[n, t_i + 1], t_w)
    kmax = lerp(k_table[n, g, tmax_i], k_table[n, g, tmax_i + 1], tmax_w)
    ibmax = lerp(ib_table[n, tmax_i], ib_table[n, tmax_i + 1], tmax_w)
    denom = kmax * ibmax
    if denom <= 0.0:
        return ib1, k1, np.nan
    return ib1, k1, (k1 * ib1) / denom


@dataclass
class RayState:
    pos: np.ndarray
    dir: np.ndarray
    cell: tuple
    level: int
    transmissivity: float
    n: int
    g: int
    R_I: float
    Ib1: float
    k1: float
    k_tmax_ib_tmax: float
    seed: int
    cell_id: int
    ray_id: int
    next_draw: int
    steps_taken: int = 0
    reflections: int = 0


class SamplingError(RuntimeError):
    pass


def init_ray(cell, ray_id, model, cdfs, T_cell, grid, seed, volume_sampling=False):
    """Initialise ray ``ray_id`` of fine-grid ``cell`` = ``(i, j, k)``.

    Starts at the cell center unless ``volume_sampling`` (uniform in the
    cell, draws 4-6).
    """
    i, j, k = cell
    cell_id = grid.linear_index(i, j, k)
    r = [uniform_draw(seed, cell_id, ray_id, d) for d in range(4)]
    direction = np.array(_direction(r[DRAW_THETA], r[DRAW_PHI]))
    n, g = sample_band(r[DRAW_BAND], r[DRAW_QUAD], cdfs)
    next_draw = 4
    if volume_sampling:
        u = np.array([uniform_draw(seed, cell_id, ray_id, DRAW_POS + a) for a in range(3)])
        next_draw = 7
    else:
        u = np.full(3, 0.5)
    pos = grid.origin + (np.array(cell) + u) * grid.spacing
    model.check_temperature(T_cell)
    ti, tw = temp_index(model.temp_grid, float(T_cell))
    mi, mw = temp_index(model.temp_grid, float(cdfs.t_max))
    ib1, k1, r_i = _prefactor(model.k_table, model.ib_table, n, g, ti, tw, mi, mw)
    if not np.isfinite(r_i):
        raise SamplingError(
            f"sampled band {n}, point {g} has zero emission at T_max = {cdfs.t_max:g} K; "
            "sampling CDFs do not match the model tables"
        )
    kmax_ibmax = k1 * ib1 / r_i if r_i > 0.0 else (
        lerp(model.k_table[n, g, mi], model.k_table[n, g, mi + 1], mw)
        * lerp(model.ib_table[n, mi], model.ib_table[n, mi + 1], mw)
    )
    return RayState(
        pos=pos, dir=direction, cell=(i, j, k), level=0, transmissivity=1.0, n=n, g=g,
        R_I=r_i, Ib1=ib1, k1=k1, k_tmax_ib_tmax=kmax_ibmax, seed=seed, cell_id=cell_id,
        ray_id=ray_id, next_draw=next_draw,
    )
