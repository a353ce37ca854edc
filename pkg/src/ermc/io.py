"""Binary table, field and solution files plus CSV helpers.

Every file starts with an ASCII header: a magic line (``KTAB1``, ``TFLD1``
or ``QRF1``), then ``key value ...`` lines, then ``END``.  The payload that
follows is little-endian float64.  Floats in headers are written with
``repr`` so they read back bit-for-bit.

KTAB1 keys: ``version``, ``bands``, ``quadrature``, ``temperatures``,
``g_points``, ``weights``, ``temp_grid``, ``edges``, ``kp_table``.  Payload:
``k_table`` in (band, g, T) order then ``ib_table`` in (band, T) order.

TFLD1 keys: ``version``, ``dims nx ny nz``, ``spacing dx dy dz``,
``origin x y z``.  Payload: temperatures with k (z) fastest.

QRF1 keys: ``version``, ``dims``, ``units W/m^3``.  Payload: ``q_r`` then
``std_dev``, each k-fastest.
"""
from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import numpy as np

from .geometry import CartesianGrid
from .spectral import QuadratureSet, SpectralModel, _kp_at_nodes

VERSION = 1
_LE = np.dtype("<f8")


class FormatError(ValueError):
    def __init__(self, path, offset, message):
        super().__init__(f"{path}: byte {offset}: {message}")
        self.path = str(path)
        self.offset = offset


def _fmt(values):
    return " ".join(repr(float(v)) for v in np.ravel(values))


def _write(path, magic, header, arrays):
    lines = [magic, f"version {VERSION}"] + [f"{k} {v}" for k, v in header] + ["END"]
    blob = ("\n".join(lines) + "\n").encode("ascii")
    with open(path, "wb") as fh:
        fh.write(blob)
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype=_LE).tobytes())


def _read(path, magic):
    """Return ``(header dict of (offset, tokens), payload bytes, payload offset)``."""
    path = Path(path)
    data = path.read_bytes()
    pos = 0
    header = {}
    first = True
    while True:
        nl = data.find(b"\n", pos)
        if nl < 0:
            raise FormatError(path, pos, "header is not terminated by END")
        try:
            line = data[pos:nl].decode("ascii")
        except UnicodeDecodeError:
            raise FormatError(path, pos, "header line is not ASCII") from None
        if first:
            if line != magic:
                raise FormatError(path, pos, f"bad magic {line[:16]!r}, expected {magic!r}")
            first = False
        elif line == "END":
            pos = nl + 1
            break
        else:
            key, _, rest = line.partition(" ")
            header[key] = (pos, rest.split())
        pos = nl + 1
    if "version" not in header:
        raise FormatError(path, 0, "missing version line")
    off, tok = header["version"]
    if tok != [str(VERSION)]:
        raise FormatError(path, off, f"unsupported version {' '.join(tok)!r} (reader knows {VERSION})")
    return header, data[pos:], pos


def _field(path, header, key, kind=float, count=None):
    if key not in header:
        raise FormatError(path, 0, f"missing header key {key!r}")
    off, tok = header[key]
    try:
        vals = [kind(t) for t in tok]
    except ValueError:
        raise FormatError(path, off, f"malformed values for {key!r}") from None
    if count is not None and len(vals) != count:
        raise FormatError(path, off, f"{key!r} has {len(vals)} values, expected {count}")
    return vals


def _payload(path, payload, start, sizes):
    need = 8 * sum(sizes)
    if len(payload) != need:
        raise FormatError(path, start + min(len(payload), need),
                          f"payload holds {len(payload)} bytes, expected {need}")
    flat = np.frombuffer(payload, dtype=_LE).astype(float)
    out, i = [], 0
    for s in sizes:
        out.append(flat[i:i + s].copy())
        i += s
    return out


# ----------------------------------------------------------------------------
# KTAB1

def write_ktab(path, model):
    nb, nq, nt = model.k_table.shape
    _write(path, "KTAB1", [
        ("bands", nb), ("quadrature", nq), ("temperatures", nt),
        ("g_points", _fmt(model.quadrature.g_points)), ("weights", _fmt(model.quadrature.weights)),
        ("temp_grid", _fmt(model.temp_grid)), ("edges", _fmt(model.edges)),
        ("kp_table", _fmt(model.kp_table)),
    ], [model.k_table, model.ib_table])


def read_ktab(path, kp_rtol=1e-12):
    header, payload, start = _read(path, "KTAB1")
    nb = _field(path, header, "bands", int, 1)[0]
    nq = _field(path, header, "quadrature", int, 1)[0]
    nt = _field(path, header, "temperatures", int, 1)[0]
    g = np.array(_field(path, header, "g_points", float, nq))
    w = np.array(_field(path, header, "weights", float, nq))
    temps = np.array(_field(path, header, "temp_grid", float, nt))
    edges = np.array(_field(path, header, "edges", float, nb + 1))
    k, ib = _payload(path, payload, start, [nb * nq * nt, nb * nt])
    try:
        model = SpectralModel(edges, QuadratureSet(g, w), temps, k.reshape(nb, nq, nt), ib.reshape(nb, nt))
    except ValueError as exc:
        raise FormatError(path, start, f"inconsistent tables: {exc}") from None
    if "kp_table" in header:
        stored = np.array(_field(path, header, "kp_table", float, nt))
        scale = np.maximum(np.abs(model.kp_table), np.finfo(float).tiny)
        if np.any(np.abs(stored - model.kp_table) > kp_rtol * scale + 1e-300):
            raise FormatError(path, header["kp_table"][0],
                              "stored Planck-mean table disagrees with the k and Ib tables")
    return model


# ----------------------------------------------------------------------------
# TFLD1

def write_field(path, grid, field):
    field = np.asarray(field, dtype=float)
    if field.shape != grid.shape:
        raise ValueError(f"field shape {field.shape} != grid shape {grid.shape}")
    _write(path, "TFLD1", [
        ("dims", f"{grid.nx} {grid.ny} {grid.nz}"),
        ("spacing", _fmt([grid.dx, grid.dy, grid.dz])),
        ("origin", _fmt(grid.origin)),
    ], [field])


def read_field(path):
    header, payload, start = _read(path, "TFLD1")
    dims = _field(path, header, "dims", int, 3)
    spacing = _field(path, header, "spacing", float, 3)
    origin = _field(path, header, "origin", float, 3)
    try:
        grid = CartesianGrid(*dims, *spacing, origin=np.array(origin))
    except ValueError as exc:
        raise FormatError(path, header["dims"][0], str(exc)) from None
    (t,) = _payload(path, payload, start, [grid.n_cells])
    return grid, t.reshape(grid.shape)


# ----------------------------------------------------------------------------
# QRF1

def write_solution(path, solution):
    nx, ny, nz = solution.q_r.shape
    _write(path, "QRF1", [("dims", f"{nx} {ny} {nz}"), ("units", "W/m^3")],
           [solution.q_r, solution.std_dev])


def read_solution(path):
    """Return ``(q_r, std_dev)`` arrays."""
    header, payload, start = _read(path, "QRF1")
    dims = _field(path, header, "dims", int, 3)
    n = int(np.prod(dims))
    q, s = _payload(path, payload, start, [n, n])
    return q.reshape(dims), s.reshape(dims)


# ----------------------------------------------------------------------------
# CSV and hashing

def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])


def read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
