from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from ermc.spectral import (
    SIGMA, LineSpectrum, NarrowBand, QuadratureSet, SpectralError, SpectralModel,
    band_transmissivity, build_cdfs, build_k_distribution, constant_spectrum, default_temp_grid,
    elsasser_spectrum, grey_model, interp_ib, interp_k, lbl_band_transmissivity, planck_bands,
    planck_intensity, planck_mean, uniform_bands,
)


def test_planck_integral_is_sigma_t4():
    nu = np.linspace(1e-3, 30000.0, 600_001)
    total = np.pi * trapezoid(planck_intensity(nu, 1000.0), nu)
    assert total == pytest.approx(SIGMA * 1000.0**4, rel=5e-3)


def test_planck_increases_with_temperature():
    nu = np.linspace(10.0, 20000.0, 500)
    assert np.all(planck_intensity(nu, 1500.0) > planck_intensity(nu, 500.0))


def test_planck_ratio_identity():
    assert planck_intensity(2500.0, 800.0) / planck_intensity(2500.0, 800.0) - 1.0 == 0.0


@pytest.mark.parametrize("nu,T", [(0.0, 1000.0), (100.0, 0.0), (-5.0, 300.0), (100.0, -1.0)])
def test_planck_rejects_non_positive(nu, T):
    with pytest.raises(SpectralError):
        planck_intensity(nu, T)


def test_band_center_vs_band_average_small():
    # center value of a 25 cm^-1 band against its mean over the band
    for T in (500.0, 1000.0, 2000.0):
        for lo in (500.0, 2000.0, 5000.0):
            nu = np.linspace(lo, lo + 25.0, 2001)
            avg = trapezoid(planck_intensity(nu, T), nu) / 25.0
            assert planck_intensity(lo + 12.5, T) == pytest.approx(avg, rel=1e-3)


def test_narrow_band_fields():
    b = NarrowBand(100.0, 125.0)
    assert b.delta_nu == 25.0 and b.nu_center == 112.5
    with pytest.raises(SpectralError):
        NarrowBand(5.0, 5.0)


def test_quadrature_validation():
    q = QuadratureSet.gauss_legendre(16)
    assert q.count == 16
    assert abs(q.weights.sum() - 1.0) <= 1e-12
    assert np.all(np.diff(q.g_points) > 0) and q.g_points[0] > 0 and q.g_points[-1] < 1
    with pytest.raises(SpectralError):
        QuadratureSet([0.5, 0.4], [0.5, 0.5])
    with pytest.raises(SpectralError):
        QuadratureSet([0.5], [0.9])


def test_constant_spectrum_gives_constant_k():
    spec = constant_spectrum(1000.0, 1100.0, [300.0, 600.0], 2.5)
    m = build_k_distribution(spec, [1000.0, 1100.0], QuadratureSet.gauss_legendre(8))
    assert np.all(m.k_table == 2.5)


def test_two_valued_step_inversion():
    nu = np.linspace(0.0, 1.0, 200)
    kap = np.where(nu < 0.5, 1.0, 3.0)
    spec = LineSpectrum(nu + 1.0, [300.0, 400.0], np.stack([kap, kap], axis=1))
    m = build_k_distribution(spec, [1.0, 2.0], QuadratureSet([0.25, 0.75], [0.5, 0.5]))
    np.testing.assert_array_equal(m.k_table[0, :, 0], [1.0, 3.0])


def test_k_distribution_errors():
    spec = constant_spectrum(1000.0, 1100.0, [300.0, 600.0], 1.0, n_samples=11)
    with pytest.raises(SpectralError, match="band 1"):
        build_k_distribution(spec, [1000.0, 1050.0, 1050.5, 1100.0], QuadratureSet.single())
    with pytest.raises(SpectralError):
        build_k_distribution(spec, [900.0, 1100.0], QuadratureSet.single())
    with pytest.raises(SpectralError):
        LineSpectrum([1.0, 3.0, 2.0], [300.0], np.ones((3, 1)))


@pytest.fixture(scope="module")
def elsasser():
    temps = default_temp_grid(300.0, 1500.0, 300.0)
    return elsasser_spectrum(2000.0, 2200.0, temps, resolution=0.01)


def _max_band_error(spec, nq):
    edges = uniform_bands(2000.0, 2200.0, 8)
    m = build_k_distribution(spec, edges, QuadratureSet.gauss_legendre(nq))
    worst = 0.0
    for n in range(8):
        for t, T in enumerate(spec.temps):
            for L in (0.01, 0.1, 1.0):
                lbl = lbl_band_transmissivity(spec, edges[n], edges[n + 1], t, L)
                worst = max(worst, abs(band_transmissivity(m, n, T, L) - lbl) / lbl)
    return worst


def test_elsasser_transmissivity_within_one_percent(elsasser):
    assert _max_band_error(elsasser, 16) < 0.01


def test_quadrature_convergence(elsasser):
    errs = [_max_band_error(elsasser, nq) for nq in (4, 8, 16)]
    assert errs[0] > errs[1] > errs[2]


def test_planck_mean_grey(grey1):
    for T in (500.0, 1000.0, 1500.0):
        assert planck_mean(grey1, T) == pytest.approx(1.0, rel=5e-3)
    m = grey_model(0.5, planck_bands(3000.0))
    assert planck_mean(m, 1000.0) == pytest.approx(0.5, rel=5e-3)


def test_planck_mean_zero():
    m = grey_model(0.0, planck_bands(1600.0, 50))
    assert planck_mean(m, 1000.0) == 0.0


def test_planck_mean_two_band_exact_sum():
    temps = np.array([500.0, 1000.0])
    q = QuadratureSet([0.25, 0.75], [0.5, 0.5])
    k = np.array([[[0.5, 0.75], [1.5, 2.0]], [[3.0, 4.0], [5.0, 6.0]]])
    ib = np.array([[0.25, 2.0], [0.125, 1.5]])
    m = SpectralModel(np.array([1000.0, 1500.0, 1750.0]), q, temps, k, ib)
    w = [Fraction(1, 2), Fraction(1, 2)]
    dnu = [Fraction(500), Fraction(250)]
    kk = [[Fraction(k[n, g, 1]) for g in range(2)] for n in range(2)]
    exact = sum(dnu[n] * Fraction(ib[n, 1]) * sum(w[g] * kk[n][g] for g in range(2)) for n in range(2))
    expect = np.pi * float(exact) / (SIGMA * 1000.0**4)
    assert planck_mean(m, 1000.0) == pytest.approx(expect, rel=1e-14)
    np.testing.assert_allclose(m.kp_table[1], expect, rtol=1e-14)


def test_cdfs_single_band():
    m = grey_model(1.0, [100.0, 2000.0], default_temp_grid(300.0, 1500.0, 100.0))
    c = build_cdfs(m, 1000.0)
    np.testing.assert_array_equal(c.band_cdf, [1.0])


def test_cdfs_two_identical_bands():
    temps = np.array([500.0, 1000.0])
    k = np.ones((2, 1, 2))
    ib = np.ones((2, 2))
    m = SpectralModel(np.array([0.0, 1.0, 2.0]), QuadratureSet.single(), temps, k, ib)
    np.testing.assert_allclose(build_cdfs(m, 1000.0).band_cdf, [0.5, 1.0], rtol=0, atol=1e-15)


def test_cdfs_transparent_error():
    m = grey_model(0.0, planck_bands(1600.0, 50))
    with pytest.raises(SpectralError):
        build_cdfs(m, 1000.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_cdfs_valid_for_random_models(nb, nq, seed):
    r = np.random.default_rng(seed)
    temps = np.array([300.0, 800.0, 1500.0])
    k = np.sort(r.exponential(size=(nb, nq, 3)), axis=1)
    g = (np.arange(nq) + 0.5) / nq
    m = SpectralModel.from_k_table(np.linspace(500.0, 5000.0, nb + 1), QuadratureSet(g, np.full(nq, 1 / nq)),
                                   temps, k)
    c = build_cdfs(m, float(r.uniform(300.0, 1500.0)))
    assert np.all(np.diff(c.band_cdf) >= 0) and abs(c.band_cdf[-1] - 1.0) <= 1e-12
    assert np.all(np.diff(c.quad_cdf, axis=1) >= 0)
    assert np.all(np.abs(c.quad_cdf[:, -1] - 1.0) <= 1e-12)


def test_interp_exact_at_nodes(grey1):
    m = SpectralModel.from_k_table(
        [1000.0, 1100.0], QuadratureSet.single(), [300.0, 400.0, 500.0],
        np.array([[[1.0, 2.0, 4.0]]]),
    )
    for t, v in zip(m.temp_grid, [1.0, 2.0, 4.0]):
        assert interp_k(m, 0, 0, t) == v
        assert interp_ib(m, 0, t) == m.ib_table[0, list(m.temp_grid).index(t)]
    assert interp_k(m, 0, 0, 450.0) == 3.0


def test_interp_matches_scalar_formula(rng):
    temps = default_temp_grid(300.0, 1500.0, 25.0)
    k = np.sort(rng.exponential(size=(3, 4, temps.size)), axis=1)
    m = SpectralModel.from_k_table(np.linspace(1000.0, 4000.0, 4),
                                   QuadratureSet.gauss_legendre(4), temps, k)
    for T in rng.uniform(300.0, 1500.0, 200):
        i = int((T - 300.0) // 25.0)
        i = min(i, temps.size - 2)
        w = (T - temps[i]) / (temps[i + 1] - temps[i])
        for n in range(3):
            expect = k[n, 2, i] + w * (k[n, 2, i + 1] - k[n, 2, i])
            assert interp_k(m, n, 2, T) == pytest.approx(expect, rel=1e-14)


def test_interp_out_of_range_is_error(grey1):
    with pytest.raises(SpectralError):
        interp_k(grey1, 0, 0, 399.0)
    with pytest.raises(SpectralError):
        interp_ib(grey1, 0, 1601.0)
    with pytest.raises(SpectralError):
        planck_mean(grey1, 2000.0)


def test_grey_model(grey1):
    assert interp_k(grey1, 3, 0, 777.0) == 1.0
    with pytest.raises(SpectralError):
        grey_model(-1.0, [0.0, 1.0])
    m5 = grey_model(5.0, planck_bands(1600.0, 100))
    assert np.all(m5.k_table == 5.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_k_monotone_in_g(seed):
    r = np.random.default_rng(seed)
    nu = np.linspace(100.0, 200.0, 400)
    kap = r.exponential(size=(400, 3)) * r.uniform(0.1, 10.0)
    spec = LineSpectrum(nu, [300.0, 600.0, 900.0], kap)
    m = build_k_distribution(spec, uniform_bands(100.0, 200.0, 4), QuadratureSet.gauss_legendre(8))
    assert np.all(np.diff(m.k_table, axis=1) >= 0.0)


def test_grey_reduction(grey1):
    # any (n, g) gives the same kappa
    vals = {interp_k(grey1, n, 0, 900.0) for n in range(grey1.n_bands)}
    assert vals == {1.0}


def test_model_is_immutable(grey1):
    with pytest.raises(ValueError):
        grey1.k_table[0, 0, 0] = 3.0
