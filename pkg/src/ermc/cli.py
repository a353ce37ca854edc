"""``ermc`` command line: verify, solve, bench, spectra.

Exit codes: 0 pass, 1 comparison failure, 2 usage or configuration error.

Configuration files are INI (``configparser``) with optional sections::

    [solve]        SolveConfig fields (rays_per_cell, tolerance, seed, sorting,
                   n_levels, ratio, steps_per_level, max_steps,
                   volume_sampling, specular_walls, workers)
    [input]        field = temperature file (TFLD1)
                   table = spectral table (KTAB1)
                   or: case = built-in case name, grid = N, lateral = N
    [boundary]     x, y, z = "periodic" or "wall T_low eps_low T_high eps_high"
    [output]       dir = output directory

Command-line flags override the file.  ``solve`` writes ``manifest.ini`` in
this same grammar, so ``ermc --config manifest.ini solve`` repeats a run.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import io
from .cases import CASES, CaseError, run_case, slab_field, slab_grid
from .geometry import PERIODIC, AxisBoundary, BoundarySpec, GeometryError, Wall
from .oracles import SlabCase
from .solver import SolveConfig, SolveError, solve, step_census
from .spectral import (
    QuadratureSet, SpectralError, band_transmissivity, build_k_distribution, default_temp_grid,
    elsasser_spectrum, grey_model, lbl_band_transmissivity, lorentz_line_spectrum, planck_bands,
    uniform_bands,
)

log = logging.getLogger("ermc")

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ----------------------------------------------------------------------------
# configuration

def load_config(path):
    cp = configparser.ConfigParser()
    if path is None:
        return cp
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file {p} does not exist")
    try:
        cp.read(p)
    except configparser.Error as exc:
        raise UsageError(f"{p}: {exc}") from None
    return cp


_BOOL = {"sorting", "volume_sampling", "specular_walls"}
_FLOAT = {"tolerance"}


def solve_config(cp, args):
    cfg = SolveConfig()
    if cp.has_section("solve"):
        known = {f.name for f in fields(SolveConfig)}
        for key, raw in cp.items("solve"):
            if key not in known:
                raise UsageError(f"unknown [solve] key {key!r}")
            try:
                if key in _BOOL:
                    val = cp.getboolean("solve", key)
                elif key in _FLOAT:
                    val = float(raw)
                else:
                    val = int(raw)
            except ValueError:
                raise UsageError(f"[solve] {key} = {raw!r} is not valid") from None
            setattr(cfg, key, val)
    for key in ("seed", "workers"):
        if getattr(args, key, None) is not None:
            setattr(cfg, key, getattr(args, key))
    for key, attr in (("rays", "rays_per_cell"), ("levels", "n_levels"),
                      ("steps_per_level", "steps_per_level")):
        if getattr(args, key, None) is not None:
            setattr(cfg, attr, getattr(args, key))
    if getattr(args, "sorting", False):
        cfg.sorting = True
    try:
        cfg.validate()
    except SolveError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def _axis_boundary(text):
    tok = text.split()
    if tok == ["periodic"]:
        return PERIODIC
    if len(tok) == 5 and tok[0] == "wall":
        try:
            t1, e1, t2, e2 = map(float, tok[1:])
            return AxisBoundary(low=Wall(t1, e1), high=Wall(t2, e2))
        except (ValueError, GeometryError) as exc:
            raise UsageError(f"bad wall spec {text!r}: {exc}") from None
    raise UsageError(f"boundary must be 'periodic' or 'wall T1 eps1 T2 eps2', got {text!r}")


def _axis_text(a):
    if a.periodic:
        return "periodic"
    return f"wall {a.low.T!r} {a.low.eps!r} {a.high.T!r} {a.high.eps!r}"


def boundary_from(cp):
    if not cp.has_section("boundary"):
        raise UsageError("config needs a [boundary] section (x, y, z)")
    axes = []
    for ax in "xyz":
        if not cp.has_option("boundary", ax):
            raise UsageError(f"[boundary] is missing axis {ax!r}")
        axes.append(_axis_boundary(cp.get("boundary", ax)))
    return BoundarySpec(*axes)


def output_dir(cp, args):
    d = getattr(args, "output_dir", None)
    if d is None and cp.has_option("output", "dir"):
        d = cp.get("output", "dir")
    d = Path(d or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


# ----------------------------------------------------------------------------
# subcommands

def cmd_verify(args, cp):
    names = list(CASES) if args.all else (args.case or [])
    if not names:
        raise UsageError("verify needs --case NAME or --all")
    for n in names:
        if n not in CASES:
            raise UsageError(f"unknown case {n!r}; available: {', '.join(CASES)}")
    cfg = solve_config(cp, args)
    out = output_dir(cp, args)
    summary = []
    for name in names:
        comps, _ = run_case(name, cfg, n=args.grid, lateral=args.lateral)
        for label, c in comps:
            io.write_csv(out / f"verify_{name}.csv",
                         [label, "q_mc", "sigma_mc", "q_ref", "sigma_ref", "tolerance"], c.rows())
            summary.append((name, "PASS" if c.passed else "FAIL", c.worst_ratio, c.max_error))
            print(f"{name}: {'PASS' if c.passed else 'FAIL'} "
                  f"(max error {c.max_error:.6g} W/m^3, worst error/tolerance {c.worst_ratio:.3f})")
    io.write_csv(out / "verify_summary.csv", ["case", "result", "worst_ratio", "max_error"], summary)
    return EXIT_PASS if all(s[1] == "PASS" for s in summary) else EXIT_FAIL


def _load_inputs(cp, args):
    """Return ``(grid, field, boundary, model, input_record)``."""
    rec = {}
    case = args.case or (cp.get("input", "case") if cp.has_option("input", "case") else None)
    field_path = args.field or (cp.get("input", "field") if cp.has_option("input", "field") else None)
    table_path = args.table or (cp.get("input", "table") if cp.has_option("input", "table") else None)
    if case:
        if case not in ("grey-lin1", "grey-parab", "isothermal"):
            raise UsageError("solve --case accepts grey-lin1, grey-parab or isothermal; "
                             "use input files for anything else")
        n = args.grid or (cp.getint("input", "grid") if cp.has_option("input", "grid") else 32)
        lateral = args.lateral or (cp.getint("input", "lateral") if cp.has_option("input", "lateral") else n)
        rec.update(case=case, grid=n, lateral=lateral)
        if case == "isothermal":
            from .geometry import CartesianGrid
            grid = CartesianGrid.box((n, n, n))
            field = np.full(grid.shape, 1000.0)
            boundary = BoundarySpec.enclosure(1000.0)
        else:
            sc = SlabCase.named(case.split("-", 1)[1])
            grid = slab_grid(n, lateral)
            field = slab_field(grid, sc)
            boundary = BoundarySpec.slab(sc.t_w1, sc.t_w2)
    elif field_path:
        grid, field = io.read_field(field_path)
        rec.update(field=str(field_path), field_sha256=io.sha256(field_path))
        boundary = boundary_from(cp)
    else:
        raise UsageError("solve needs a temperature field (--field / [input] field) or --case")
    if cp.has_section("boundary") and not field_path:
        boundary = boundary_from(cp)
    if table_path:
        model = io.read_ktab(table_path)
        rec.update(table=str(table_path), table_sha256=io.sha256(table_path))
    else:
        kappa = args.grey_kappa if args.grey_kappa is not None else (
            cp.getfloat("input", "grey_kappa") if cp.has_option("input", "grey_kappa") else 1.0)
        hot = max(float(np.max(field)), *boundary.wall_temperatures(), 1.0)
        cold = min(float(np.min(field)), *boundary.wall_temperatures())
        lo = max(0.0, 5.0 * np.floor(cold / 5.0) - 5.0)
        hi = 5.0 * np.ceil(hot / 5.0) + 5.0
        model = grey_model(kappa, planck_bands(hi), default_temp_grid(lo, hi, 5.0))
        rec.update(grey_kappa=repr(kappa))
    return grid, field, boundary, model, rec


def cmd_solve(args, cp):
    cfg = solve_config(cp, args)
    out = output_dir(cp, args)
    grid, field, boundary, model, rec = _load_inputs(cp, args)
    sol = solve(grid, field, boundary, model, cfg)
    io.write_solution(out / "solution.qrf", sol)
    census = step_census(sol)
    io.write_csv(out / "census.csv", ["level", "steps"], census.rows())
    man = configparser.ConfigParser()
    man["solve"] = {k: str(v) for k, v in cfg.to_dict().items()}
    man["input"] = {k: str(v) for k, v in rec.items()}
    man["boundary"] = {ax: _axis_text(a) for ax, a in zip("xyz", boundary.axes)}
    man["output"] = {"dir": str(out), "solution_sha256": io.sha256(out / "solution.qrf")}
    with open(out / "manifest.ini", "w") as fh:
        man.write(fh)
    print(f"solved {grid.n_cells} cells x {cfg.rays_per_cell} rays: "
          f"{census.total_steps} steps, {sol.wall_time:.2f} s -> {out / 'solution.qrf'}")
    return EXIT_PASS


def _fit(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def cmd_bench(args, cp):
    cfg = solve_config(cp, args)
    out = output_dir(cp, args)
    rays = [int(v) for v in args.rays_sweep.split(",")]
    grids = [int(v) for v in args.grid_sweep.split(",")]
    sc = SlabCase.named("parab")
    rows, truncated = [], False
    # compile the kernels first so the first timing is not inflated
    warm = slab_grid(4, 1)
    solve(warm, slab_field(warm, sc), BoundarySpec.slab(sc.t_w1, sc.t_w2),
          grey_model(1.0, planck_bands(1005.0, 50), default_temp_grid(495.0, 1005.0, 5.0)),
          SolveConfig(rays_per_cell=2))
    t_start = time.perf_counter()
    plan = [(grids[0], r) for r in rays] + [(n, rays[0]) for n in grids[1:]]
    for n, r in plan:
        if time.perf_counter() - t_start > args.budget:
            truncated = True
            break
        grid = slab_grid(n, args.lateral or n)
        field = slab_field(grid, sc)
        model = grey_model(1.0, planck_bands(1005.0), default_temp_grid(495.0, 1005.0, 5.0))
        c = SolveConfig(**{**cfg.to_dict(), "rays_per_cell": r})
        sol = solve(grid, field, BoundarySpec.slab(sc.t_w1, sc.t_w2), model, c)
        rows.append((grid.n_cells, r, sol.wall_time, sol.total_steps, float(np.max(sol.std_dev))))
        print(f"cells {grid.n_cells:>8d} rays {r:>6d}: {sol.wall_time:8.3f} s, "
              f"{sol.total_steps} steps, max sigma {rows[-1][4]:.4g}")
    path = out / "bench.csv"
    io.write_csv(path, ["cells", "rays", "wall_time", "total_steps", "max_sigma"], rows)
    by_rays = [r for r in rows if r[0] == rows[0][0]] if rows else []
    by_cells = [r for r in rows if r[1] == rays[0]] if rows else []
    s_rays = _fit([r[1] for r in by_rays], [r[2] for r in by_rays])
    s_cells = _fit([r[0] for r in by_cells], [r[2] for r in by_cells])
    with open(path, "a") as fh:
        fh.write(f"# fit time ~ rays^{s_rays:.3f}; time ~ cells^{s_cells:.3f}\n")
        fh.write("# GPU reference exponents, context only: multigrid t ~ N^1.05, sorting t ~ 0.7 R\n")
        if truncated:
            fh.write(f"# TRUNCATED: time budget of {args.budget} s exceeded\n")
    print(f"time ~ rays^{s_rays:.3f}, time ~ cells^{s_cells:.3f}"
          + (" (truncated by budget)" if truncated else ""))
    return EXIT_PASS


def _temps_arg(text):
    lo, hi, step = map(float, text.split(","))
    return default_temp_grid(lo, hi, step)


def cmd_spectra(args, cp):
    out = output_dir(cp, args)
    temps = _temps_arg(args.temps)
    if args.generator == "elsasser":
        spectrum = elsasser_spectrum(
            args.nu_min, args.nu_max, temps, spacing=args.spacing, half_width=args.half_width,
            strength=args.strength, resolution=args.resolution,
        )
    elif args.generator == "constant":
        n = int(round((args.nu_max - args.nu_min) / args.resolution)) + 1
        nu = np.linspace(args.nu_min, args.nu_max, n)
        spectrum = _spectrum(nu, temps, np.full((n, temps.size), args.strength / args.spacing))
    else:
        if not args.lines:
            raise UsageError("--generator lines needs --lines FILE")
        try:
            lines = np.loadtxt(args.lines, comments="#", ndmin=2)
        except (OSError, ValueError) as exc:
            raise UsageError(f"{args.lines}: {exc}") from None
        if lines.shape[1] != 3:
            raise UsageError(f"{args.lines}: expected 3 columns (nu_center strength half_width)")
        n = int(round((args.nu_max - args.nu_min) / args.resolution)) + 1
        nu = np.linspace(args.nu_min, args.nu_max, n)
        spectrum = lorentz_line_spectrum(lines, nu, temps, n_width=args.n_width)
        edges = uniform_bands(args.nu_min, args.nu_max, args.bands)
        for b in range(args.bands):
            inside = (lines[:, 0] >= edges[b]) & (lines[:, 0] < edges[b + 1])
            if not inside.any() and args.continuum <= 0.0:
                raise UsageError(f"band {b} [{edges[b]:g}, {edges[b + 1]:g}] cm^-1 has no lines "
                                 "and no continuum")
        if args.continuum > 0.0:
            spectrum = _spectrum(nu, temps, spectrum.kappa_nu + args.continuum)
    edges = uniform_bands(args.nu_min, args.nu_max, args.bands)
    model = build_k_distribution(spectrum, edges, QuadratureSet.gauss_legendre(args.quadrature))
    io.write_ktab(out / "spectrum.ktab", model)
    rows = []
    worst = 0.0
    t_nodes = [0, temps.size // 2, temps.size - 1]
    for n in range(model.n_bands):
        for ti in sorted(set(t_nodes)):
            for L in (0.01, 0.1, 1.0):
                tk = band_transmissivity(model, n, float(temps[ti]), L)
                tl = lbl_band_transmissivity(spectrum, edges[n], edges[n + 1], ti, L)
                rows.append((n, float(edges[n]), float(edges[n + 1]), float(temps[ti]), L, tk, tl,
                             abs(tk - tl)))
                worst = max(worst, abs(tk - tl))
    io.write_csv(out / "transmissivity.csv",
                 ["band", "nu_lo", "nu_hi", "T", "L", "tau_kdist", "tau_lbl", "abs_error"], rows)
    print(f"{model.n_bands} bands x {args.quadrature} points -> {out / 'spectrum.ktab'}; "
          f"max transmissivity error {worst:.3e}")
    return EXIT_PASS


def _spectrum(nu, temps, kap):
    from .spectral import LineSpectrum
    return LineSpectrum(nu, temps, kap)


# ----------------------------------------------------------------------------
# argument parsing

def _globals(parser, suppress):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=d, help="64-bit unsigned run seed")
    parser.add_argument("--workers", type=int, default=d, help="threads (0 = one per CPU)")
    parser.add_argument("--output-dir", default=d, help="directory for output files")
    parser.add_argument("--config", default=d, help="INI configuration file")
    parser.add_argument("-v", "--verbose", action="store_true", default=d)


def build_parser():
    p = argparse.ArgumentParser(prog="ermc", description="Reciprocal Monte Carlo radiative transfer.")
    _globals(p, False)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        _globals(sp, True)
        return sp

    v = add("verify", "run built-in cases against their references")
    v.add_argument("--case", action="append", help=f"one of: {', '.join(CASES)}")
    v.add_argument("--all", action="store_true")
    v.add_argument("--grid", type=int, default=None, help="cells along the resolved axis")
    v.add_argument("--lateral", type=int, default=None, help="periodic cells per slab axis")
    v.add_argument("--rays", type=int, default=None)

    s = add("solve", "solve a field and write QRF1 + census + manifest")
    s.add_argument("--field", help="TFLD1 temperature file")
    s.add_argument("--table", help="KTAB1 spectral table (default: grey model)")
    s.add_argument("--grey-kappa", type=float, default=None)
    s.add_argument("--case", help="built-in field instead of a file (grey-lin1, grey-parab, isothermal)")
    s.add_argument("--grid", type=int, default=None)
    s.add_argument("--lateral", type=int, default=None)
    s.add_argument("--rays", type=int, default=None)
    s.add_argument("--levels", type=int, default=None)
    s.add_argument("--steps-per-level", type=int, default=None)
    s.add_argument("--sorting", action="store_true")

    b = add("bench", "time a ray and grid sweep on the parab slab")
    b.add_argument("--rays-sweep", default="500,1000,2000,4000")
    b.add_argument("--grid-sweep", default="16,24,32")
    b.add_argument("--lateral", type=int, default=None)
    b.add_argument("--budget", type=float, default=600.0, help="seconds before the sweep stops")
    b.add_argument("--levels", type=int, default=None)

    sp = add("spectra", "build a KTAB1 table from a synthetic spectrum or line list")
    sp.add_argument("--generator", choices=["elsasser", "constant", "lines"], default="elsasser")
    sp.add_argument("--lines", help="line list: nu_center strength half_width per row")
    sp.add_argument("--nu-min", type=float, default=2000.0)
    sp.add_argument("--nu-max", type=float, default=2200.0)
    sp.add_argument("--bands", type=int, default=8)
    sp.add_argument("--quadrature", type=int, default=16)
    sp.add_argument("--temps", default="300,1500,100", help="lo,hi,step in K")
    sp.add_argument("--spacing", type=float, default=2.5)
    sp.add_argument("--half-width", type=float, default=0.125)
    sp.add_argument("--strength", type=float, default=10.0)
    sp.add_argument("--resolution", type=float, default=0.025)
    sp.add_argument("--n-width", type=float, default=0.5)
    sp.add_argument("--continuum", type=float, default=0.0)
    return p


COMMANDS = {"verify": cmd_verify, "solve": cmd_solve, "bench": cmd_bench, "spectra": cmd_spectra}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cp = load_config(args.config)
        return COMMANDS[args.command](args, cp)
    except (UsageError, CaseError, SolveError, SpectralError, GeometryError,
            io.FormatError, configparser.Error) as exc:
        print(f"ermc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
