"""Narrow-band correlated-k spectral model.

Tables are indexed ``k_table[band, g, temperature]`` and ``ib_table[band,
temperature]``.  Wavenumbers are in cm^-1, absorption coefficients in m^-1 and
band blackbody intensities in W m^-2 sr^-1 (cm^-1)^-1, so that
``pi * delta_nu * Ib`` is a power flux in W m^-2.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy import constants

SIGMA = constants.Stefan_Boltzmann
# first and second radiation constants for intensity per unit wavenumber (SI)
C1 = 2.0 * constants.h * constants.c**2
C2 = constants.h * constants.c / constants.k


class SpectralError(ValueError):
    pass


def planck_intensity(nu, T):
    """Blackbody spectral intensity per unit wavenumber.

    ``nu`` in cm^-1, ``T`` in K; returns W m^-2 sr^-1 (cm^-1)^-1.  Both
    arguments broadcast.
    """
    nu = np.asarray(nu, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any(nu <= 0.0):
        raise SpectralError("wavenumber must be positive")
    if np.any(T <= 0.0):
        raise SpectralError("temperature must be positive")
    nu_m = 100.0 * nu
    with np.errstate(over="ignore"):
        out = 100.0 * C1 * nu_m**3 / np.expm1(C2 * nu_m / T)
    return out[()] if out.ndim == 0 else out


def _planck_table(nu_center, temps):
    """Ib at band centers for every temperature node; zero at T = 0."""
    out = np.zeros((nu_center.size, temps.size))
    hot = temps > 0.0
    if np.any(hot):
        out[:, hot] = planck_intensity(nu_center[:, None], temps[None, hot])
    return out


def default_temp_grid(t_min=200.0, t_max=3000.0, step=25.0):
    return np.arange(t_min, t_max + 0.5 * step, step)


def uniform_bands(nu_min, nu_max, n_bands):
    """Contiguous equal-width band edges covering [nu_min, nu_max]."""
    return np.linspace(nu_min, nu_max, n_bands + 1)


def planck_bands(t_hot, n_bands=2000, cutoff=30.0):
    """Equal-width bands from 0 up to where ``C2*nu/t_hot`` reaches ``cutoff``.

    Covers all but ~1e-9 of the blackbody spectrum at ``t_hot`` and below;
    the usual partition for grey models.
    """
    nu_max = cutoff * t_hot / (100.0 * C2)
    return uniform_bands(0.0, nu_max, n_bands)


@dataclass(frozen=True)
class NarrowBand:
    nu_lo: float
    nu_hi: float

    def __post_init__(self):
        if not self.nu_hi > self.nu_lo:
            raise SpectralError(f"band [{self.nu_lo}, {self.nu_hi}] is empty")

    @property
    def delta_nu(self):
        return self.nu_hi - self.nu_lo

    @property
    def nu_center(self):
        return 0.5 * (self.nu_lo + self.nu_hi)


@dataclass(frozen=True)
class QuadratureSet:
    g_points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g_points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if g.shape != w.shape or g.ndim != 1 or g.size == 0:
            raise SpectralError("g_points and weights must be equal-length 1-D arrays")
        if np.any(g <= 0.0) or np.any(g >= 1.0) or np.any(np.diff(g) <= 0.0):
            raise SpectralError("g_points must be strictly increasing inside (0, 1)")
        if np.any(w <= 0.0) or abs(w.sum() - 1.0) > 1e-12:
            raise SpectralError("weights must be positive and sum to 1")
        object.__setattr__(self, "g_points", g)
        object.__setattr__(self, "weights", w)

    @property
    def count(self):
        return self.g_points.size

    @classmethod
    def gauss_legendre(cls, n=16):
        x, w = np.polynomial.legendre.leggauss(n)
        w = 0.5 * w
        return cls(0.5 * (x + 1.0), w / w.sum())

    @classmethod
    def single(cls):
        return cls(np.array([0.5]), np.array([1.0]))


@dataclass(frozen=True)
class LineSpectrum:
    """High-resolution absorption spectrum, ``kappa_nu[sample, temperature]``."""

    nu_grid: np.ndarray
    temps: np.ndarray
    kappa_nu: np.ndarray

    def __post_init__(self):
        nu = np.asarray(self.nu_grid, dtype=float)
        temps = np.asarray(self.temps, dtype=float)
        kap = np.asarray(self.kappa_nu, dtype=float)
        if nu.ndim != 1 or np.any(np.diff(nu) <= 0.0):
            raise SpectralError("nu_grid must be strictly increasing")
        if kap.shape != (nu.size, temps.size):
            raise SpectralError(f"kappa_nu shape {kap.shape} != {(nu.size, temps.size)}")
        if np.any(kap < 0.0):
            raise SpectralError("kappa_nu must be non-negative")
        object.__setattr__(self, "nu_grid", nu)
        object.__setattr__(self, "temps", temps)
        object.__setattr__(self, "kappa_nu", kap)

    def sample_edges(self):
        """Edges of the spectral interval each sample represents (midpoint rule)."""
        nu = self.nu_grid
        mid = 0.5 * (nu[1:] + nu[:-1])
        edges = np.concatenate([[nu[0] - (mid[0] - nu[0])], mid, [nu[-1] + (nu[-1] - mid[-1])]])
        return edges


@dataclass(frozen=True)
class SpectralModel:
    edges: np.ndarray
    quadrature: QuadratureSet
    temp_grid: np.ndarray
    k_table: np.ndarray
    ib_table: np.ndarray
    kp_table: np.ndarray = field(default=None)

    def __post_init__(self):
        edges = np.ascontiguousarray(self.edges, dtype=float)
        temps = np.ascontiguousarray(self.temp_grid, dtype=float)
        k = np.ascontiguousarray(self.k_table, dtype=float)
        ib = np.ascontiguousarray(self.ib_table, dtype=float)
        nb_, nq, nt = edges.size - 1, self.quadrature.count, temps.size
        if nb_ < 1 or np.any(np.diff(edges) <= 0.0):
            raise SpectralError("band edges must be strictly increasing")
        if nt < 2 or np.any(np.diff(temps) <= 0.0) or temps[0] < 0.0:
            raise SpectralError("temp_grid must hold >= 2 ascending non-negative nodes")
        if k.shape != (nb_, nq, nt):
            raise SpectralError(f"k_table shape {k.shape} != {(nb_, nq, nt)}")
        if ib.shape != (nb_, nt):
            raise SpectralError(f"ib_table shape {ib.shape} != {(nb_, nt)}")
        if np.any(k < 0.0) or not np.all(np.isfinite(k)):
            raise SpectralError("k_table must be finite and non-negative")
        for arr in (edges, temps, k, ib):
            arr.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "temp_grid", temps)
        object.__setattr__(self, "k_table", k)
        object.__setattr__(self, "ib_table", ib)
        kp = _kp_at_nodes(edges, self.quadrature.weights, temps, k, ib)
        kp.setflags(write=False)
        object.__setattr__(self, "kp_table", kp)

    @classmethod
    def from_k_table(cls, edges, quadrature, temp_grid, k_table):
        """Model with ``ib_table`` filled from Planck's law at band centers."""
        edges = np.asarray(edges, dtype=float)
        temps = np.asarray(temp_grid, dtype=float)
        centers = 0.5 * (edges[1:] + edges[:-1])
        return cls(edges, quadrature, temps, k_table, _planck_table(centers, temps))

    @property
    def n_bands(self):
        return self.edges.size - 1

    @property
    def delta_nu(self):
        return np.diff(self.edges)

    @property
    def nu_center(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def bands(self):
        return [NarrowBand(lo, hi) for lo, hi in zip(self.edges[:-1], self.edges[1:])]

    @property
    def t_min(self):
        return float(self.temp_grid[0])

    @property
    def t_max(self):
        return float(self.temp_grid[-1])

    def check_temperature(self, T, what="temperature"):
        T = np.asarray(T, dtype=float)
        if T.size and (np.min(T) < self.t_min or np.max(T) > self.t_max):
            raise SpectralError(
                f"{what} range [{np.min(T):g}, {np.max(T):g}] K outside spectral table "
                f"range [{self.t_min:g}, {self.t_max:g}] K"
            )


def _kp_at_nodes(edges, weights, temps, k, ib):
    band_k = np.einsum("g,ngt->nt", weights, k)
    power = np.pi * np.einsum("n,nt,nt->t", np.diff(edges), ib, band_k)
    kp = np.zeros_like(temps)
    hot = temps > 0.0
    kp[hot] = power[hot] / (SIGMA * temps[hot] ** 4)
    return kp


@nb.njit(cache=True, nogil=True, error_model="numpy")
def temp_index(temp_grid, T):
    """Bracketing node ``i`` and fraction ``w`` so value = (1-w)*a[i] + w*a[i+1].

    Caller guarantees ``temp_grid[0] <= T <= temp_grid[-1]``.
    """
    nt = temp_grid.size
    i = np.searchsorted(temp_grid, T, side="right") - 1
    if i >= nt - 1:
        i = nt - 2
    if i < 0:
        i = 0
    w = (T - temp_grid[i]) / (temp_grid[i + 1] - temp_grid[i])
    return i, w


@nb.njit(cache=True, nogil=True, error_model="numpy")
def lerp(a, b, w):
    return (1.0 - w) * a + w * b


def interp_k(model, n, g, T):
    """Absorption coefficient of band ``n``, quadrature point ``g`` at ``T``."""
    model.check_temperature(T)
    i, w = temp_index(model.temp_grid, float(T))
    row = model.k_table[n, g]
    return lerp(row[i], row[i + 1], w)


def interp_ib(model, n, T):
    """Band blackbody intensity of band ``n`` at ``T``."""
    model.check_temperature(T)
    i, w = temp_index(model.temp_grid, float(T))
    row = model.ib_table[n]
    return lerp(row[i], row[i + 1], w)


def _interp_rows(model, T):
    model.check_temperature(T)
    i, w = temp_index(model.temp_grid, float(T))
    k = (1.0 - w) * model.k_table[:, :, i] + w * model.k_table[:, :, i + 1]
    ib = (1.0 - w) * model.ib_table[:, i] + w * model.ib_table[:, i + 1]
    return k, ib


def planck_mean(model, T):
    """Planck-mean absorption coefficient from the model tables at ``T``."""
    if T <= 0.0:
        raise SpectralError("temperature must be positive")
    k, ib = _interp_rows(model, T)
    band_k = k @ model.quadrature.weights
    return float(np.pi * np.sum(model.delta_nu * ib * band_k) / (SIGMA * T**4))


@dataclass(frozen=True)
class SamplingCDFs:
    band_cdf: np.ndarray
    quad_cdf: np.ndarray
    t_max: float


def _cumulative(p):
    c = np.cumsum(p)
    total = c[-1]
    c = c / total
    c[-1] = 1.0
    return c


def build_cdfs(model, T_max):
    """Band and quadrature-point CDFs of the emission spectrum at ``T_max``."""
    k, ib = _interp_rows(model, T_max)
    wk = k * model.quadrature.weights[None, :]
    band_k = wk.sum(axis=1)
    f_band = model.delta_nu * ib * band_k
    if not np.any(f_band > 0.0):
        raise SpectralError(f"Planck-mean absorption is zero at T_max = {T_max:g} K")
    band_cdf = _cumulative(f_band)
    quad_cdf = np.empty_like(wk)
    for n in range(model.n_bands):
        # never sampled when f_band[n] == 0; any valid CDF will do
        quad_cdf[n] = _cumulative(wk[n] if band_k[n] > 0.0 else model.quadrature.weights)
    return SamplingCDFs(band_cdf, np.ascontiguousarray(quad_cdf), float(T_max))


def build_k_distribution(spectrum, edges, quadrature):
    """Reorder a line-by-line spectrum into per-band k-distributions.

    At each temperature node the samples inside a band are sorted ascending;
    the cumulative spectral fraction g(k) is inverted at the quadrature
    abscissae by linear interpolation.
    """
    edges = np.asarray(edges, dtype=float)
    nu = spectrum.nu_grid
    if edges[0] < nu[0] or edges[-1] > nu[-1]:
        raise SpectralError(
            f"spectrum [{nu[0]:g}, {nu[-1]:g}] does not cover bands [{edges[0]:g}, {edges[-1]:g}]"
        )
    sample_edges = spectrum.sample_edges()
    nbands, nt = edges.size - 1, spectrum.temps.size
    k_table = np.empty((nbands, quadrature.count, nt))
    for n in range(nbands):
        lo, hi = edges[n], edges[n + 1]
        inside = (nu >= lo) & ((nu < hi) | ((n == nbands - 1) & (nu <= hi)))
        idx = np.flatnonzero(inside)
        if idx.size < 2:
            raise SpectralError(f"band {n} [{lo:g}, {hi:g}] cm^-1 holds {idx.size} spectral samples (need >= 2)")
        width = np.clip(sample_edges[idx + 1], lo, hi) - np.clip(sample_edges[idx], lo, hi)
        for t in range(nt):
            kap = spectrum.kappa_nu[idx, t]
            order = np.argsort(kap, kind="stable")
            w = width[order]
            g_nodes = (np.cumsum(w) - 0.5 * w) / w.sum()
            k_table[n, :, t] = np.interp(quadrature.g_points, g_nodes, kap[order])
    return SpectralModel.from_k_table(edges, quadrature, spectrum.temps, k_table)


def grey_model(kappa, edges, temp_grid=None, quadrature=None):
    """Spectral model with the same absorption coefficient everywhere."""
    if kappa < 0.0:
        raise SpectralError(f"grey absorption coefficient must be >= 0, got {kappa}")
    temps = default_temp_grid() if temp_grid is None else np.asarray(temp_grid, dtype=float)
    quadrature = QuadratureSet.single() if quadrature is None else quadrature
    edges = np.asarray(edges, dtype=float)
    k = np.full((edges.size - 1, quadrature.count, temps.size), float(kappa))
    return SpectralModel.from_k_table(edges, quadrature, temps, k)


def band_transmissivity(model, n, T, L):
    """Correlated-k band-mean transmissivity over path length ``L`` [m]."""
    k, _ = _interp_rows(model, T)
    return float(np.sum(model.quadrature.weights * np.exp(-k[n] * L)))


def lbl_band_transmissivity(spectrum, lo, hi, t_index, L):
    """Band-mean line-by-line transmissivity by quadrature over the samples."""
    nu = spectrum.nu_grid
    e = spectrum.sample_edges()
    width = np.clip(e[1:], lo, hi) - np.clip(e[:-1], lo, hi)
    sel = width > 0.0
    tau = np.exp(-spectrum.kappa_nu[sel, t_index] * L)
    return float(np.sum(width[sel] * tau) / np.sum(width[sel]))


def elsasser_spectrum(
    nu_min,
    nu_max,
    temps,
    spacing=2.5,
    half_width=0.125,
    strength=10.0,
    band_center=None,
    band_width=None,
    t_ref=1000.0,
    resolution=None,
):
    """Synthetic spectrum of regularly spaced Lorentz lines (Elsasser model).

    ``strength`` is the integrated line intensity per line spacing in
    m^-1 cm^-1, i.e. the mean absorption coefficient ``strength / spacing``
    in m^-1 at ``t_ref``.  An optional Gaussian envelope
    (``band_center``, ``band_width``) varies the strength across the
    spectrum.  Strength scales as ``(t_ref/T)**0.5`` and half-width as
    ``(t_ref/T)**0.5``.
    """
    temps = np.asarray(temps, dtype=float)
    if resolution is None:
        resolution = half_width / 5.0
    n = int(round((nu_max - nu_min) / resolution)) + 1
    nu = np.linspace(nu_min, nu_max, n)
    envelope = np.ones_like(nu)
    if band_center is not None:
        envelope = np.exp(-0.5 * ((nu - band_center) / band_width) ** 2)
    kap = np.empty((nu.size, temps.size))
    phase = 2.0 * np.pi * (nu - nu_min - 0.5 * spacing) / spacing
    for t, T in enumerate(temps):
        scale = np.sqrt(t_ref / max(T, 1.0))
        beta = 2.0 * np.pi * half_width * scale / spacing
        s = strength * scale
        kap[:, t] = envelope * (s / spacing) * np.sinh(beta) / (np.cosh(beta) - np.cos(phase))
    return LineSpectrum(nu, temps, kap)


def constant_spectrum(nu_min, nu_max, temps, kappa, n_samples=201):
    nu = np.linspace(nu_min, nu_max, n_samples)
    temps = np.asarray(temps, dtype=float)
    return LineSpectrum(nu, temps, np.full((nu.size, temps.size), float(kappa)))


def lorentz_line_spectrum(lines, nu_grid, temps, t_ref=296.0, n_width=0.5):
    """Spectrum from a line list of ``(nu_center, strength, half_width)`` rows.

    Strength is in m^-1 cm^-1 and half-width in cm^-1, both at ``t_ref``;
    half-width scales as ``(t_ref/T)**n_width``.  Strength is held constant.
    """
    lines = np.atleast_2d(np.asarray(lines, dtype=float))
    temps = np.asarray(temps, dtype=float)
    nu = np.asarray(nu_grid, dtype=float)
    kap = np.zeros((nu.size, temps.size))
    for t, T in enumerate(temps):
        gamma = lines[:, 2] * (t_ref / max(T, 1.0)) ** n_width
        for (nc, s, _), g in zip(lines, gamma):
            kap[:, t] += s * g / np.pi / ((nu - nc) ** 2 + g**2)
    return LineSpectrum(nu, temps, kap)
