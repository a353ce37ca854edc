import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ermc.geometry import (
    FACE_TOL, PERIODIC, AxisBoundary, BoundarySpec, CartesianGrid, GeometryError, Wall,
    build_hierarchy, coarsen_grid, face_distances, locate, max_levels, restrict_field,
)


def test_grid_basics():
    g = CartesianGrid.box((4, 5, 6), (2.0, 1.0, 3.0))
    assert g.n_cells == 120
    assert g.cell_volume == pytest.approx(0.5 * 0.2 * 0.5)
    assert g.linear_index(1, 2, 3) == (1 * 5 + 2) * 6 + 3
    assert tuple(int(v) for v in g.unravel(g.linear_index(3, 4, 5))) == (3, 4, 5)
    with pytest.raises(GeometryError):
        CartesianGrid(0, 1, 1, 1.0, 1.0, 1.0)
    with pytest.raises(GeometryError):
        CartesianGrid(1, 1, 1, 1.0, -1.0, 1.0)


def test_boundary_validation():
    with pytest.raises(GeometryError):
        Wall(300.0, 1.5)
    with pytest.raises(GeometryError):
        Wall(-1.0)
    with pytest.raises(GeometryError):
        AxisBoundary(periodic=True, low=Wall(1.0))
    with pytest.raises(GeometryError):
        AxisBoundary(low=Wall(1.0))
    b = BoundarySpec.slab(500.0, 1500.0, 0.5, 1.0)
    periodic, wall_T, wall_eps = b.arrays()
    assert list(periodic) == [False, True, True]
    assert list(wall_T[0]) == [500.0, 1500.0] and list(wall_eps[0]) == [0.5, 1.0]
    assert sorted(b.wall_temperatures()) == [500.0, 1500.0]


def test_hierarchy_identity_level():
    g = CartesianGrid.box((6, 6, 6))
    T = np.random.default_rng(0).uniform(300, 900, g.shape)
    h = build_hierarchy(g, T, 1)
    assert h.n_levels == 1 and h.fields[0] is not None
    np.testing.assert_array_equal(h.fields[0], T)


def test_uniform_field_stays_exact():
    g = CartesianGrid.box((12, 10, 7))
    h = build_hierarchy(g, np.full(g.shape, 1000.0), 4)
    for f in h.fields:
        assert np.all(f == 1000.0)


def test_hierarchy_chain_sizes():
    g = CartesianGrid.box((192, 192, 192))
    sizes = [192, 96, 48, 24, 12, 6, 3]
    grids = [g]
    for _ in range(6):
        grids.append(coarsen_grid(grids[-1], 2))
    assert [gr.nx for gr in grids] == sizes
    assert max_levels(g, 2) >= 7


def test_too_many_levels_error():
    g = CartesianGrid.box((4, 4, 4))
    with pytest.raises(GeometryError, match="at most 3"):
        build_hierarchy(g, np.ones(g.shape), 4)


def test_restrict_block_mean():
    fine = np.array([500.0, 500.0, 500.0, 500.0, 1500.0, 1500.0, 1500.0, 1500.0]).reshape(2, 2, 2)
    assert restrict_field(fine, 2)[0, 0, 0] == 1000.0


def test_restrict_linear_field_exact():
    g = CartesianGrid.box((8, 4, 4))
    x = g.centers(0)
    fine = np.broadcast_to((300.0 + 100.0 * x)[:, None, None], g.shape)
    coarse = restrict_field(fine, 2)
    xc = coarsen_grid(g, 2).centers(0)
    np.testing.assert_allclose(coarse[:, 0, 0], 300.0 + 100.0 * xc, rtol=1e-14)


def test_restrict_partial_blocks():
    fine = np.arange(5.0).reshape(5, 1, 1)
    np.testing.assert_array_equal(restrict_field(fine, 2).ravel(), [0.5, 2.5, 4.0])


@settings(max_examples=30, deadline=None)
@given(st.tuples(st.integers(1, 9), st.integers(1, 9), st.integers(1, 9)), st.integers(2, 3),
       st.integers(0, 2**32 - 1))
def test_restriction_bounds_and_extents(shape, ratio, seed):
    g = CartesianGrid.box(shape, (1.0, 2.0, 0.5))
    T = np.random.default_rng(seed).uniform(300.0, 2000.0, shape)
    h = build_hierarchy(g, T, max_levels(g, ratio), ratio)
    for gr, f in zip(h.grids, h.fields):
        np.testing.assert_allclose(gr.lengths, g.lengths, rtol=0, atol=1e-12)
        assert f.min() >= T.min() and f.max() <= T.max()


def test_locate_examples():
    g = CartesianGrid.box((8, 8, 8))
    assert locate([0.5, 0.5, 0.5], g) == (4, 4, 4, 0)
    assert locate([0.0, 0.0, 0.0], g)[:3] == (0, 0, 0)
    # an internal face resolves by travel direction
    assert locate([0.25, 0.1, 0.1], g, direction=[-1.0, 0.0, 0.0]).i == 1
    assert locate([0.25, 0.1, 0.1], g, direction=[1.0, 0.0, 0.0]).i == 2
    with pytest.raises(GeometryError):
        locate([1.5, 0.5, 0.5], g)
    assert locate([1.5, 0.5, 0.5], g, periodic=(True, False, False)).i == 4


def test_locate_matches_floor(rng):
    g = CartesianGrid.box((7, 5, 9), (1.3, 0.7, 2.1), origin=(-0.2, 0.1, 0.0))
    pts = g.origin + rng.uniform(0, 1, (1000, 3)) * g.lengths
    for p in pts:
        expect = np.minimum(np.floor((p - g.origin) / g.spacing).astype(int), np.array(g.shape) - 1)
        assert tuple(locate(p, g)[:3]) == tuple(expect)


def test_face_distance_examples():
    g = CartesianGrid.box((1, 1, 1))
    dfx, dfy, dfz, ds, ax = face_distances([0.5, 0.5, 0.5], [1.0, 0.0, 0.0], (0, 0, 0), g)
    assert (ds, ax) == (0.5, 0) and np.isinf(dfy) and np.isinf(dfz)
    d = np.ones(3) / np.sqrt(3.0)
    *_, ds, ax = face_distances([0.5, 0.5, 0.5], d, (0, 0, 0), g)
    assert ds == pytest.approx(0.5 * np.sqrt(3.0)) and ax == 0


def test_exit_point_on_face_and_relocation(rng):
    g = CartesianGrid.box((6, 5, 4), (1.0, 1.5, 0.8))
    eps = 1e-9
    for _ in range(500):
        cell = tuple(int(rng.integers(0, n)) for n in g.shape)
        pos = g.origin + (np.array(cell) + rng.uniform(0.01, 0.99, 3)) * g.spacing
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        *_, ds, ax = face_distances(pos, d, cell, g)
        exit_ = pos + ds * d
        side = cell[ax] + (1 if d[ax] > 0 else 0)
        assert abs(exit_[ax] - (g.origin[ax] + side * g.spacing[ax])) < 1e-12
        new = list(cell)
        new[ax] += 1 if d[ax] > 0 else -1
        if 0 <= new[ax] < g.shape[ax]:
            assert tuple(locate(exit_ + eps * d, g, direction=d)[:3]) == tuple(new)
