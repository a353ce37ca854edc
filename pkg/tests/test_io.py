import numpy as np
import pytest

from ermc import io
from ermc.geometry import BoundarySpec, CartesianGrid
from ermc.solver import SolveConfig, solve
from ermc.spectral import QuadratureSet, SpectralModel, default_temp_grid


@pytest.fixture
def model(rng):
    temps = default_temp_grid(300.0, 1500.0, 100.0)
    k = rng.uniform(0.0, 5.0, size=(3, 4, temps.size))
    k.sort(axis=1)
    return SpectralModel.from_k_table(np.array([1000.0, 1500.0, 2200.0, 3000.0]),
                                      QuadratureSet.gauss_legendre(4), temps, k)


def test_ktab_roundtrip(tmp_path, model):
    p = tmp_path / "m.ktab"
    io.write_ktab(p, model)
    back = io.read_ktab(p)
    for name in ("edges", "temp_grid", "k_table", "ib_table", "kp_table"):
        assert getattr(back, name).tobytes() == getattr(model, name).tobytes()
    assert back.quadrature.g_points.tobytes() == model.quadrature.g_points.tobytes()
    io.write_ktab(tmp_path / "again.ktab", back)
    assert io.sha256(p) == io.sha256(tmp_path / "again.ktab")


def test_field_roundtrip(tmp_path, rng):
    g = CartesianGrid(3, 4, 5, 0.1, 0.2, 0.3, origin=np.array([1.0, -2.0, 0.5]))
    T = rng.uniform(300, 900, g.shape)
    io.write_field(tmp_path / "f.tfld", g, T)
    g2, T2 = io.read_field(tmp_path / "f.tfld")
    assert T2.tobytes() == T.tobytes()
    assert (g2.nx, g2.ny, g2.nz, g2.dx, g2.dy, g2.dz) == (3, 4, 5, 0.1, 0.2, 0.3)
    np.testing.assert_array_equal(g2.origin, g.origin)


def test_solution_roundtrip(tmp_path, grey1):
    g = CartesianGrid(4, 1, 1, 0.25, 0.25, 0.25)
    T = np.array([600.0, 900.0, 1200.0, 700.0]).reshape(g.shape)
    s = solve(g, T, BoundarySpec.slab(500.0, 500.0), grey1, SolveConfig(rays_per_cell=20))
    io.write_solution(tmp_path / "s.qrf", s)
    q, sd = io.read_solution(tmp_path / "s.qrf")
    assert q.tobytes() == s.q_r.tobytes() and sd.tobytes() == s.std_dev.tobytes()


def test_bad_magic(tmp_path, model):
    p = tmp_path / "m.ktab"
    io.write_ktab(p, model)
    data = p.read_bytes()
    p.write_bytes(b"KTAB9" + data[5:])
    with pytest.raises(io.FormatError) as err:
        io.read_ktab(p)
    assert str(p) in str(err.value) and "byte 0" in str(err.value)


def test_bad_version_names_offset(tmp_path, model):
    p = tmp_path / "m.ktab"
    io.write_ktab(p, model)
    p.write_bytes(p.read_bytes().replace(b"version 1\n", b"version 7\n", 1))
    with pytest.raises(io.FormatError) as err:
        io.read_ktab(p)
    assert err.value.offset == len("KTAB1\n")
    assert "version" in str(err.value) and str(p) in str(err.value)


def test_truncated_payload(tmp_path, model):
    p = tmp_path / "m.ktab"
    io.write_ktab(p, model)
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(io.FormatError, match="payload"):
        io.read_ktab(p)


def test_kp_mismatch(tmp_path, model):
    p = tmp_path / "m.ktab"
    io.write_ktab(p, model)
    data = p.read_bytes()
    head, _, tail = data.partition(b"END\n")
    lines = head.split(b"\n")
    for i, ln in enumerate(lines):
        if ln.startswith(b"kp_table "):
            vals = ln.split()[1:]
            vals[0] = repr(float(vals[0]) * 1.01).encode()
            lines[i] = b" ".join([b"kp_table"] + vals)
    p.write_bytes(b"\n".join(lines) + b"END\n" + tail)
    with pytest.raises(io.FormatError, match="Planck-mean"):
        io.read_ktab(p)


def test_unterminated_header(tmp_path):
    p = tmp_path / "x.qrf"
    p.write_bytes(b"QRF1\nversion 1\ndims 1 1 1")
    with pytest.raises(io.FormatError, match="END"):
        io.read_solution(p)


def test_csv_roundtrip(tmp_path):
    io.write_csv(tmp_path / "a.csv", ["a", "b"], [(1, 0.1), (2, 1 / 3)])
    h, rows = io.read_csv(tmp_path / "a.csv")
    assert h == ["a", "b"] and float(rows[1][1]) == 1 / 3
