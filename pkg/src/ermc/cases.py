"""Built-in verification cases and the MC-versus-reference comparison rule.

Slab cases are 1D in x with periodic y and z.  Because nothing varies
across y and z, the periodic extent can be shortened to ``lateral`` cells of
the same spacing without changing the physics; profiles are averaged over
the periodic directions before comparison.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import BoundarySpec, CartesianGrid
from .oracles import (
    BoxCase, SlabCase, band_emissive_power, box_oracle, box_temperature, cell_point_oracle,
    lbl_model, slab_oracle,
)
from .solver import SolveConfig, solve
from .spectral import (
    QuadratureSet, build_k_distribution, default_temp_grid, elsasser_spectrum, grey_model,
    planck_bands, uniform_bands,
)


class CaseError(ValueError):
    pass


@dataclass
class Comparison:
    x: np.ndarray
    q_mc: np.ndarray
    sigma_mc: np.ndarray
    q_ref: np.ndarray
    sigma_ref: np.ndarray
    rel_tol: float
    passed: bool = field(init=False)
    tolerance: np.ndarray = field(init=False)

    def __post_init__(self):
        peak = float(np.max(np.abs(self.q_ref))) if self.q_ref.size else 0.0
        combined = np.sqrt(self.sigma_mc**2 + self.sigma_ref**2)
        self.tolerance = np.maximum(self.rel_tol * peak, 3.0 * combined)
        self.passed = bool(np.all(np.abs(self.q_mc - self.q_ref) <= self.tolerance))

    @property
    def max_error(self):
        return float(np.max(np.abs(self.q_mc - self.q_ref))) if self.x.size else 0.0

    @property
    def worst_ratio(self):
        """Largest |error| / tolerance; <= 1 means pass."""
        err = np.abs(self.q_mc - self.q_ref)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(self.tolerance > 0, err / self.tolerance, np.where(err > 0, np.inf, 0.0))
        return float(np.max(r)) if r.size else 0.0

    def rows(self):
        return [
            (float(a), float(b), float(c), float(d), float(e), float(t))
            for a, b, c, d, e, t in zip(self.x, self.q_mc, self.sigma_mc, self.q_ref,
                                        self.sigma_ref, self.tolerance)
        ]


def compare(x, q_mc, sigma_mc, q_ref, sigma_ref=None, rel_tol=0.02):
    """Pointwise test ``|mc - ref| <= max(rel_tol * peak|ref|, 3 * combined sigma)``."""
    q_ref = np.asarray(q_ref, dtype=float)
    sigma_ref = np.zeros_like(q_ref) if sigma_ref is None else np.asarray(sigma_ref, dtype=float)
    return Comparison(np.asarray(x, dtype=float), np.asarray(q_mc, dtype=float),
                      np.asarray(sigma_mc, dtype=float), q_ref, sigma_ref, rel_tol)


def plane_average(solution, axis=0):
    """Mean over the two other axes and the standard error of that mean."""
    other = tuple(a for a in range(3) if a != axis)
    n = np.prod([solution.q_r.shape[a] for a in other])
    q = np.nanmean(solution.q_r, axis=other)
    se = np.sqrt(np.nansum(solution.std_dev**2, axis=other)) / n
    return q, se


# ----------------------------------------------------------------------------
# grids and models

def slab_grid(n=32, lateral=None, length=1.0):
    lateral = n if lateral is None else lateral
    dx = length / n
    return CartesianGrid(n, lateral, lateral, dx, dx, dx)


def slab_field(grid, case):
    x = grid.centers(0)
    return np.broadcast_to(case.temperature(x)[:, None, None], grid.shape).copy()


def box_grid(n=32):
    return CartesianGrid.box((n, n, n))


def grey_slab_model(kappa, t_lo, t_hi, step=5.0, n_bands=2000):
    """Grey model whose tables cover ``[t_lo, t_hi]`` at ``step`` K."""
    lo = max(0.0, step * np.floor(t_lo / step) - step)
    hi = step * np.ceil(t_hi / step) + step
    return grey_model(kappa, planck_bands(hi, n_bands), default_temp_grid(lo, hi, step))


def sin_box_model(kappa, n_bands=2000):
    """Grey model for the cold ``sin`` box (medium below ~90 K, 0 K walls)."""
    return grey_model(kappa, planck_bands(90.0, n_bands), default_temp_grid(0.0, 90.0, 0.25))


def synthetic_spectrum(temps=None, nu_min=1500.0, nu_max=3500.0, resolution=0.025,
                       strength=5.0):
    """Elsasser band used by the spectral cases: Gaussian envelope at 2500 cm^-1."""
    temps = default_temp_grid(400.0, 1100.0, 25.0) if temps is None else temps
    return elsasser_spectrum(
        nu_min, nu_max, temps, spacing=2.5, half_width=0.125, strength=strength,
        band_center=2500.0, band_width=300.0, t_ref=1000.0, resolution=resolution,
    )


def narrow_band_model(spectrum, band_width=25.0, n_quad=16):
    nu = spectrum.nu_grid
    n_bands = int(round((nu[-1] - nu[0]) / band_width))
    edges = uniform_bands(nu[0], nu[-1], n_bands)
    return build_k_distribution(spectrum, edges, QuadratureSet.gauss_legendre(n_quad))


# ----------------------------------------------------------------------------
# case registry

@dataclass
class Case:
    name: str
    description: str
    run: Callable  # (config, n, lateral) -> list[(label, Comparison)]


def _slab_run(profile, kappa=1.0, eps=(1.0, 1.0)):
    def run(config, n=32, lateral=None):
        case = SlabCase.named(profile, kappa, eps1=eps[0], eps2=eps[1])
        grid = slab_grid(n, lateral)
        T = slab_field(grid, case)
        model = grey_slab_model(kappa, min(T.min(), case.t_w1, case.t_w2),
                                max(T.max(), case.t_w1, case.t_w2),
                                step=1.0 if T.max() - T.min() < 50 else 5.0)
        boundary = BoundarySpec.slab(case.t_w1, case.t_w2, *eps)
        sol = solve(grid, T, boundary, model, config)
        q, se = plane_average(sol)
        x = grid.centers(0)
        ref = slab_oracle(case, x, emissive=lambda t: band_emissive_power(model, t))
        return [("x", compare(x, q, se, ref, rel_tol=0.02))], sol
    return run


def _box_run(kappa):
    def run(config, n=32, lateral=None):
        grid = box_grid(n)
        c = grid.centers(0)
        X, Y, Z = np.meshgrid(c, c, c, indexing="ij")
        T = box_temperature("sin")(X, Y, Z)
        model = sin_box_model(kappa)
        mid = [n // 2 - 1, n // 2] if n % 2 == 0 else [n // 2]
        cells = [grid.linear_index(i, j, k) for i in range(n) for j in mid for k in mid]
        sol = solve(grid, T, BoundarySpec.enclosure(0.0), model, config, cells=cells)
        sub_q = sol.q_r[:, mid][:, :, mid]
        sub_s = sol.std_dev[:, mid][:, :, mid]
        q = sub_q.mean(axis=(1, 2))
        se = np.sqrt((sub_s**2).sum(axis=(1, 2))) / len(mid) ** 2
        # every averaged cell is a mirror image of the first one
        pts = np.stack([c, np.full(n, c[mid[0]]), np.full(n, c[mid[0]])], axis=1)
        ref = box_oracle(BoxCase.named("sin", kappa), pts)
        return [("x", compare(c, q, se, ref, rel_tol=0.03))], sol
    return run


def _isothermal_run(config, n=16, lateral=None):
    grid = box_grid(n)
    T = np.full(grid.shape, 1000.0)
    model = grey_slab_model(1.0, 1000.0, 1000.0, step=25.0)
    sol = solve(grid, T, BoundarySpec.enclosure(1000.0), model, config)
    q, se = plane_average(sol)
    x = grid.centers(0)
    cmp_ = compare(x, q, se, np.zeros_like(x), rel_tol=0.0)
    # exact zero is required, not a statistical match
    cmp_.tolerance = np.zeros_like(x)
    cmp_.passed = bool(np.all(sol.q_r == 0.0) and np.all(sol.std_dev == 0.0))
    return [("x", cmp_)], sol


def _spectral_slab_run(config, n=32, lateral=None):
    spectrum = synthetic_spectrum()
    nb = narrow_band_model(spectrum)
    lbl = lbl_model(spectrum)
    case = SlabCase.named("parab", 1.0)
    grid = slab_grid(n, lateral)
    T = slab_field(grid, case)
    boundary = BoundarySpec.slab(case.t_w1, case.t_w2)
    sol = solve(grid, T, boundary, nb, config)
    ref = solve(grid, T, boundary, lbl, config)
    q, se = plane_average(sol)
    qr, ser = plane_average(ref)
    return [("x", compare(grid.centers(0), q, se, qr, ser, rel_tol=0.05))], sol


def _two_cell_run(config, n=None, lateral=None):
    grid, T, boundary, model = two_cell_setup()
    sol = solve(grid, T, boundary, model, config)
    ref = two_cell_reference(grid, T, model)
    c = grid.centers(0)
    cmp_ = compare(c, sol.q_r[:, 0, 0], sol.std_dev[:, 0, 0], ref, rel_tol=0.0)
    return [("x", cmp_)], sol


def two_cell_setup(kappa=1.0, temps=(1000.0, 500.0), size=0.5):
    """2x1x1 grey domain, 0 K black walls."""
    grid = CartesianGrid(2, 1, 1, size, size, size)
    T = np.array(temps, dtype=float).reshape(2, 1, 1)
    model = grey_model(kappa, planck_bands(max(temps)), default_temp_grid(0.0, 1000.0, 5.0))
    return grid, T, BoundarySpec.enclosure(0.0), model


def two_cell_reference(grid, T, model, rtol=1e-7):
    e = band_emissive_power(model, T)
    kappa = float(model.k_table.flat[0])
    return cell_point_oracle(grid, e, np.zeros((3, 2)), kappa,
                             np.stack([grid.centers(0), np.full(2, grid.centers(1)[0]),
                                       np.full(2, grid.centers(2)[0])], axis=1), rtol=rtol)


CASES = {
    "isothermal": Case("isothermal", "16^3 uniform 1000 K enclosure; exact zero", _isothermal_run),
    "grey-lin1": Case("grey-lin1", "grey slab, lin1 profile, kappa 1, black walls", _slab_run("lin1")),
    "grey-parab": Case("grey-parab", "grey slab, parab profile, kappa 1, black walls", _slab_run("parab")),
    "grey-sin-0.5": Case("grey-sin-0.5", "grey unit box, sin profile, kappa 0.5, cold walls", _box_run(0.5)),
    "grey-sin-5": Case("grey-sin-5", "grey unit box, sin profile, kappa 5, cold walls", _box_run(5.0)),
    "grey-lin2-eps-0-1": Case("grey-lin2-eps-0-1", "grey slab, lin2 profile, wall emissivities 0 and 1",
                              _slab_run("lin2", eps=(0.0, 1.0))),
    "grey-lin2-eps-0.1": Case("grey-lin2-eps-0.1", "grey slab, lin2 profile, wall emissivities 0.1 and 0.1",
                              _slab_run("lin2", eps=(0.1, 0.1))),
    "spectral-parab": Case("spectral-parab", "synthetic Elsasser band, parab slab: narrow-band vs line-by-line",
                           _spectral_slab_run),
    "two-cell": Case("two-cell", "2x1x1 grey cells, cold black walls, vs exact path quadrature",
                     _two_cell_run),
}


def get_case(name):
    try:
        return CASES[name]
    except KeyError:
        raise CaseError(f"unknown case {name!r}; available: {', '.join(CASES)}") from None


def run_case(name, config=None, n=None, lateral=None):
    """Run a built-in case; returns ``(comparisons, solution)``."""
    case = get_case(name)
    config = SolveConfig() if config is None else config
    kwargs = {}
    if n is not None:
        kwargs["n"] = n
    if lateral is not None:
        kwargs["lateral"] = lateral
    return case.run(config, **kwargs)
