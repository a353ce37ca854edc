"""Deterministic reference solutions for grey media and a line-by-line mode.

All oracles return the radiative power as *absorbed minus emitted* [W/m^3],
the same sign as :func:`ermc.solver.solve`.  They are written in the
"difference" form ``kappa/pi * int dOmega [...](E' - E(p))`` so that an
equilibrium configuration evaluates to exactly zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .solver import SolveConfig, solve
from .spectral import SIGMA, QuadratureSet, SpectralModel, _interp_rows

__all__ = [
    "OracleError", "SlabCase", "BoxCase", "slab_oracle", "box_oracle", "cell_point_oracle",
    "lbl_model", "lbl_reference", "band_emissive_power", "slab_profile", "box_profile",
]


class OracleError(ValueError):
    pass


def _sigma_t4(T):
    return SIGMA * np.asarray(T, dtype=float) ** 4


def _grey_kappa(kappa):
    if isinstance(kappa, SpectralModel):
        k = kappa.k_table
        if k.size == 0 or np.any(k != k.flat[0]):
            raise OracleError("slab and box oracles need a grey absorption coefficient")
        return float(k.flat[0])
    kappa = float(kappa)
    if kappa < 0.0:
        raise OracleError("absorption coefficient must be >= 0")
    return kappa


# ----------------------------------------------------------------------------
# temperature profiles

def slab_profile(name, length=1.0, T=None):
    """``(T(x), T_w1, T_w2)`` for a named 1D profile.

    ``lin1``: 500 + 1000 x, walls 500/1500 K.  ``lin2``: 295 + 10 x, walls
    295/305 K.  ``parab``: 500 - 2000 x^2 + 2000 x, walls 500 K.
    ``isothermal``: uniform ``T`` (default 1000 K) with matching walls.
    Positions are scaled by ``length`` so the profile always spans ``[0, L]``.
    """
    if name == "lin1":
        return (lambda x: 500.0 + 1000.0 * (x / length)), 500.0, 1500.0
    if name == "lin2":
        return (lambda x: 295.0 + 10.0 * (x / length)), 295.0, 305.0
    if name == "parab":
        def parab(x):
            s = x / length
            return 500.0 - 2000.0 * s**2 + 2000.0 * s
        return parab, 500.0, 500.0
    if name == "isothermal":
        t0 = 1000.0 if T is None else float(T)
        return (lambda x: np.full_like(np.asarray(x, dtype=float), t0)), t0, t0
    raise OracleError(f"unknown slab profile {name!r}; known: lin1, lin2, parab, isothermal")


def box_profile(name):
    """Emissive power ``sigma T^4`` as a function of ``(x, y, z)`` on the unit cube.

    ``sin``: sigma T^4 = pi sin(pi x) sin(pi y) sin(pi z) with cold walls.
    ``3dimens``: T = 500 - 2000 (xyz)^2 + 2000 xyz with 500 K walls.
    ``isothermal``: 1000 K everywhere including walls.
    Returns ``(emissive, T_wall)``.
    """
    if name == "sin":
        return (lambda x, y, z: np.pi * np.sin(np.pi * x) * np.sin(np.pi * y) * np.sin(np.pi * z)), 0.0
    if name == "3dimens":
        def e3(x, y, z):
            p = x * y * z
            return _sigma_t4(500.0 - 2000.0 * p**2 + 2000.0 * p)
        return e3, 500.0
    if name == "isothermal":
        return (lambda x, y, z: np.full(np.broadcast(x, y, z).shape, SIGMA * 1000.0**4)), 1000.0
    raise OracleError(f"unknown box profile {name!r}; known: sin, 3dimens, isothermal")


def box_temperature(name):
    """Temperature ``T(x, y, z)`` belonging to :func:`box_profile`."""
    emissive, _ = box_profile(name)
    return lambda x, y, z: (np.maximum(emissive(x, y, z), 0.0) / SIGMA) ** 0.25


@dataclass
class SlabCase:
    """Grey 1D slab between two diffuse walls at ``x = 0`` and ``x = length``."""

    length: float
    kappa: float
    profile: Callable
    t_w1: float
    t_w2: float
    eps1: float = 1.0
    eps2: float = 1.0
    name: str = "custom"

    def __post_init__(self):
        if self.length <= 0.0:
            raise OracleError("slab length must be positive")
        for e in (self.eps1, self.eps2):
            if not 0.0 <= e <= 1.0:
                raise OracleError("wall emissivity must lie in [0, 1]")

    @classmethod
    def named(cls, name, kappa=1.0, length=1.0, eps1=1.0, eps2=1.0, T=None):
        prof, tw1, tw2 = slab_profile(name, length, T)
        return cls(length, kappa, prof, tw1, tw2, eps1, eps2, name)

    @classmethod
    def tabulated(cls, x, T, kappa, t_w1, t_w2, eps1=1.0, eps2=1.0):
        x = np.asarray(x, dtype=float)
        T = np.asarray(T, dtype=float)
        if x.ndim != 1 or x.size < 2 or np.any(np.diff(x) <= 0.0):
            raise OracleError("tabulated profile needs strictly increasing positions")
        return cls(float(x[-1] - x[0]), kappa, lambda s: np.interp(s + x[0], x, T), t_w1, t_w2,
                   eps1, eps2, "custom")

    def temperature(self, x):
        return np.asarray(self.profile(np.asarray(x, dtype=float)), dtype=float)


@dataclass
class BoxCase:
    """Grey medium in the unit cube with black walls at a single temperature."""

    kappa: float
    emissive: Callable
    t_wall: float = 0.0
    name: str = "custom"
    lengths: tuple = field(default=(1.0, 1.0, 1.0))

    @classmethod
    def named(cls, name, kappa):
        emissive, tw = box_profile(name)
        return cls(kappa, emissive, tw, name)


# ----------------------------------------------------------------------------
# slab oracle

def _gl(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _slab_eval(case, x, kappa, n, emissive):
    """Q at positions ``x`` using ``n`` Gauss points on each side of ``x``."""
    L = case.length
    t, w = _gl(n)
    ex = emissive(case.temperature(x))
    q_int = np.zeros_like(x)
    for side in (-1.0, 1.0):
        span = x if side < 0 else L - x
        # x' = x +/- span t^2 clusters nodes at the log singularity
        xp = x[:, None] + side * span[:, None] * t[None, :] ** 2
        jac = 2.0 * span[:, None] * t[None, :]
        d = span[:, None] * t[None, :] ** 2
        f = (emissive(case.temperature(xp)) - ex[:, None]) * special.exp1(kappa * d) * jac
        f[~np.isfinite(f)] = 0.0
        q_int += f @ w
    # wall radiosities: J = eps E_w + (1 - eps) H
    xs = L * t**2
    js = 2.0 * L * t
    e_med = emissive(case.temperature(xs))
    e_med_r = emissive(case.temperature(L - xs))
    a1 = np.sum(w * e_med * special.expn(2, kappa * xs) * js)
    a2 = np.sum(w * e_med_r * special.expn(2, kappa * xs) * js)
    e3 = special.expn(3, kappa * L)
    r1, r2 = 1.0 - case.eps1, 1.0 - case.eps2
    A = np.array([[1.0, -2.0 * r1 * e3], [-2.0 * r2 * e3, 1.0]])
    b = np.array([
        case.eps1 * emissive(case.t_w1) + r1 * 2.0 * kappa * a1,
        case.eps2 * emissive(case.t_w2) + r2 * 2.0 * kappa * a2,
    ])
    j1, j2 = np.linalg.solve(A, b)
    g_minus = (
        2.0 * (j1 - ex) * special.expn(2, kappa * x)
        + 2.0 * (j2 - ex) * special.expn(2, kappa * (L - x))
        + 2.0 * kappa * q_int
    )
    return kappa * g_minus


def slab_oracle(case, x_points, rtol=1e-5, n_start=16, n_max=4096, emissive=None):
    """Radiative power of a grey 1D slab at ``x_points`` (absorbed minus emitted).

    Exponential-integral kernels with the medium term in subtracted form and a
    2x2 radiosity solve for grey diffuse walls.  The Gauss rule is doubled
    until the profile changes by less than ``rtol`` times its peak.
    ``emissive(T)`` defaults to ``sigma T^4``.
    """
    kappa = _grey_kappa(case.kappa)
    x = np.atleast_1d(np.asarray(x_points, dtype=float))
    if np.any(x < 0.0) or np.any(x > case.length):
        raise OracleError("slab sample points must lie in [0, L]")
    emissive = _sigma_t4 if emissive is None else emissive
    if kappa == 0.0:
        return np.zeros_like(x)
    n = n_start
    prev = _slab_eval(case, x, kappa, n, emissive)
    while True:
        n *= 2
        cur = _slab_eval(case, x, kappa, n, emissive)
        scale = max(np.max(np.abs(cur)), np.finfo(float).tiny)
        if np.max(np.abs(cur - prev)) <= rtol * scale or n >= n_max:
            if np.max(np.abs(cur - prev)) > rtol * scale:
                raise OracleError(f"slab quadrature did not converge with {n} points")
            return cur
        prev = cur


# ----------------------------------------------------------------------------
# box and cell oracles: angular quadrature around a point

def _face_directions(p, lengths, n_ang):
    """Directions, solid-angle weights and wall distances covering the sphere.

    Each face of the box is seen from ``p`` through the tangent-angle
    parametrisation ``u ~ (tan a, tan b, +-1)``; returns arrays of shape
    ``(6 * n_ang**2, ...)``.
    """
    t, w = _gl(n_ang)
    dirs, wts, dist = [], [], []
    for ax in range(3):
        b_ax, c_ax = (ax + 1) % 3, (ax + 2) % 3
        for side in (0, 1):
            h = (lengths[ax] - p[ax]) if side else p[ax]
            a_lo, a_hi = math.atan(-p[b_ax] / h), math.atan((lengths[b_ax] - p[b_ax]) / h)
            b_lo, b_hi = math.atan(-p[c_ax] / h), math.atan((lengths[c_ax] - p[c_ax]) / h)
            al = a_lo + (a_hi - a_lo) * t
            be = b_lo + (b_hi - b_lo) * t
            ta, tb = np.meshgrid(np.tan(al), np.tan(be), indexing="ij")
            wa, wb = np.meshgrid(w * (a_hi - a_lo), w * (b_hi - b_lo), indexing="ij")
            norm = np.sqrt(1.0 + ta**2 + tb**2)
            d = np.empty(ta.shape + (3,))
            d[..., ax] = (1.0 if side else -1.0) / norm
            d[..., b_ax] = ta / norm
            d[..., c_ax] = tb / norm
            domega = wa * wb * (1.0 + ta**2) * (1.0 + tb**2) / norm**3
            dirs.append(d.reshape(-1, 3))
            wts.append(domega.ravel())
            dist.append((h * norm).ravel())
    return np.concatenate(dirs), np.concatenate(wts), np.concatenate(dist)


def _box_point(case, kappa, p, n_ang, n_line):
    lengths = np.asarray(case.lengths, dtype=float)
    dirs, domega, s_w = _face_directions(p, lengths, n_ang)
    e_p = float(case.emissive(*p))
    e_w = SIGMA * case.t_wall**4
    tw = -np.expm1(-kappa * s_w)
    t, w = _gl(n_line)
    # substitution t = 1 - exp(-kappa s) turns the attenuation into a unit weight
    tt = tw[:, None] * t[None, :]
    s = -np.log1p(-tt) / kappa
    pts = p[None, None, :] + s[..., None] * dirs[:, None, :]
    pts = np.clip(pts, 0.0, lengths)
    e = case.emissive(pts[..., 0], pts[..., 1], pts[..., 2])
    line = tw * ((e - e_p) @ w)
    wall = (e_w - e_p) * (1.0 - tw)
    return kappa / np.pi * np.sum(domega * (line + wall))


def box_oracle(case, points, rtol=1e-4, n_ang=16, n_line=16, n_max=256):
    """Radiative power at interior ``points`` (shape ``(m, 3)``) of a grey black-walled box.

    Incident radiation from brute-force quadrature: the sphere of directions
    around each point is split into the six faces it sees, and the medium
    contribution along every direction is integrated in optical-depth
    coordinates.  Angular and path rules are doubled together until the
    result changes by less than ``rtol`` of the largest magnitude.
    """
    kappa = _grey_kappa(case.kappa)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lengths = np.asarray(case.lengths, dtype=float)
    if np.any(pts <= 0.0) or np.any(pts >= lengths):
        raise OracleError("box sample points must lie strictly inside the domain")
    if kappa == 0.0:
        return np.zeros(len(pts))

    def run(na, nl):
        return np.array([_box_point(case, kappa, p, na, nl) for p in pts])

    prev = run(n_ang, n_line)
    while True:
        n_ang, n_line = 2 * n_ang, 2 * n_line
        cur = run(n_ang, n_line)
        diff = np.max(np.abs(cur - prev))
        scale = max(np.max(np.abs(cur)), np.finfo(float).tiny)
        if diff <= rtol * scale:
            return cur
        if n_ang >= n_max:
            raise OracleError(f"box quadrature did not converge (change {diff / scale:.2e})")
        prev = cur


def _splits(lo, hi, planes):
    inner = [v for v in planes if lo < v < hi]
    return np.array([lo, *inner, hi])


def _cell_point(p, grid, e_cells, e_walls, kappa, n_ang):
    """Exact path integral through piecewise-constant cells, quadrature in angle only."""
    t, w = _gl(n_ang)
    lengths = grid.lengths
    origin = grid.origin
    planes = [origin[a] + np.arange(grid.shape[a] + 1) * grid.spacing[a] for a in range(3)]
    pl = p - origin
    e_p = e_cells[tuple(int(v) for v in np.minimum(pl // grid.spacing, np.array(grid.shape) - 1))]
    total = 0.0
    for ax in range(3):
        b_ax, c_ax = (ax + 1) % 3, (ax + 2) % 3
        for side in (0, 1):
            h = (lengths[ax] - pl[ax]) if side else pl[ax]
            # split the face along internal cell planes so the crossing
            # sequence is fixed inside each patch
            ub = _splits(0.0, lengths[b_ax], planes[b_ax][1:-1] - origin[b_ax])
            uc = _splits(0.0, lengths[c_ax], planes[c_ax][1:-1] - origin[c_ax])
            ab = np.arctan((ub - pl[b_ax]) / h)
            ac = np.arctan((uc - pl[c_ax]) / h)
            al = (ab[:-1, None] + (ab[1:] - ab[:-1])[:, None] * t[None, :]).ravel()
            wal = ((ab[1:] - ab[:-1])[:, None] * w[None, :]).ravel()
            be = (ac[:-1, None] + (ac[1:] - ac[:-1])[:, None] * t[None, :]).ravel()
            wbe = ((ac[1:] - ac[:-1])[:, None] * w[None, :]).ravel()
            ta, tb = np.meshgrid(np.tan(al), np.tan(be), indexing="ij")
            wa, wb = np.meshgrid(wal, wbe, indexing="ij")
            norm = np.sqrt(1.0 + ta**2 + tb**2)
            d = np.empty(ta.shape + (3,))
            d[..., ax] = (1.0 if side else -1.0) / norm
            d[..., b_ax] = ta / norm
            d[..., c_ax] = tb / norm
            domega = (wa * wb * (1.0 + ta**2) * (1.0 + tb**2) / norm**3).ravel()
            d = d.reshape(-1, 3)
            s_w = (h * norm).ravel()
            vals = np.empty(d.shape[0])
            for r in range(d.shape[0]):
                vals[r] = _segment_sum(p, d[r], s_w[r], grid, e_cells, kappa, e_p)
            total += np.sum(domega * (vals + (e_walls[ax, side] - e_p) * np.exp(-kappa * s_w)))
    return kappa / np.pi * total


def _segment_sum(p, d, s_w, grid, e_cells, kappa, e_p):
    # distances at which the ray crosses any cell plane
    cuts = [0.0, s_w]
    for a in range(3):
        if d[a] == 0.0:
            continue
        planes = grid.origin[a] + np.arange(1, grid.shape[a]) * grid.spacing[a]
        s = (planes - p[a]) / d[a]
        cuts.extend(s[(s > 0.0) & (s < s_w)])
    cuts = np.unique(cuts)
    mid = 0.5 * (cuts[1:] + cuts[:-1])
    pos = p[None, :] + mid[:, None] * d[None, :]
    idx = np.floor((pos - grid.origin) / grid.spacing).astype(int)
    idx = np.clip(idx, 0, np.array(grid.shape) - 1)
    e = e_cells[idx[:, 0], idx[:, 1], idx[:, 2]]
    att = np.exp(-kappa * cuts)
    return float(np.sum((att[:-1] - att[1:]) * (e - e_p)))


def cell_point_oracle(grid, e_cells, e_walls, kappa, points, rtol=1e-6, n_ang=8, n_max=128):
    """Radiative power at ``points`` for piecewise-constant cell emissive powers.

    ``e_cells`` has the grid shape; ``e_walls[axis, side]`` are black-wall
    emissive powers.  Paths are integrated exactly (the medium is uniform in
    each cell); only the angular integral uses quadrature.  This is the
    quantity a centre-started ray estimator targets for the cell at each point.
    """
    kappa = _grey_kappa(kappa)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    e_cells = np.asarray(e_cells, dtype=float)
    e_walls = np.asarray(e_walls, dtype=float).reshape(3, 2)

    def run(n):
        return np.array([_cell_point(p, grid, e_cells, e_walls, kappa, n) for p in pts])

    prev = run(n_ang)
    while True:
        n_ang *= 2
        cur = run(n_ang)
        diff = np.max(np.abs(cur - prev))
        scale = max(np.max(np.abs(cur)), np.finfo(float).tiny)
        if diff <= rtol * scale:
            return cur
        if n_ang >= n_max:
            raise OracleError(f"angular quadrature did not converge (change {diff / scale:.2e})")
        prev = cur


def band_emissive_power(model, T):
    """``pi * sum_n dnu_n Ib_n(T)``: the model's own discretisation of sigma T^4."""
    T = np.asarray(T, dtype=float)
    flat = T.ravel()
    out = np.empty(flat.size)
    for i, t in enumerate(flat):
        _, ib = _interp_rows(model, float(t))
        out[i] = np.pi * np.sum(model.delta_nu * ib)
    return out.reshape(T.shape)


# ----------------------------------------------------------------------------
# line-by-line mode

def lbl_model(spectrum, memory_cap=2 * 1024**3):
    """One band per spectral sample with a single quadrature point."""
    n_s, n_t = spectrum.kappa_nu.shape
    need = 8 * n_s * n_t * 3
    if need > memory_cap:
        raise OracleError(
            f"line-by-line tables need ~{need / 1024**2:.0f} MiB, above the "
            f"{memory_cap / 1024**2:.0f} MiB cap; use a coarser spectrum"
        )
    k = np.asarray(spectrum.kappa_nu, dtype=float)[:, None, :].copy()
    return SpectralModel.from_k_table(spectrum.sample_edges(), QuadratureSet.single(),
                                      spectrum.temps, k)


def lbl_reference(grid, field, boundary, spectrum, config=None, memory_cap=2 * 1024**3, cells=None):
    """Line-by-line solve: the ERMC solver on the per-sample model of ``spectrum``."""
    model = lbl_model(spectrum, memory_cap)
    return solve(grid, field, boundary, model, SolveConfig() if config is None else config, cells)
