import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from ahxray.grid import (
    GridFunction,
    PolarGrid,
    ResolutionWarning,
    TestFunctionFamily,
    WeightedNormSpec,
    fiber_quadrature,
    hyperbolic_bump,
    inner,
    integrate_disk,
    read_grid,
    weighted_norm,
    write_grid,
    zero_derivatives,
)

GRID = PolarGrid(256, 256)
FAMILY = TestFunctionFamily(0)


def _soft_disk(R, w):
    def profile(rho):
        return 0.5 * (1 - np.tanh((rho - R) / w))

    def fn(z):
        return profile(2 * np.arctanh(np.abs(z)))

    return profile, fn


class TestPolarGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            PolarGrid(64, 63)
        with pytest.raises(ValueError):
            PolarGrid(64, 64, 1.0)
        with pytest.raises(ValueError):
            PolarGrid(4, 64)

    def test_cell_centered(self):
        g = PolarGrid(8, 8, 0.8)
        np.testing.assert_allclose(g.r, 0.1 * np.arange(8) + 0.05)
        assert g.area_weights().sum() == pytest.approx(np.pi * 0.64)

    def test_nonfinite_values_rejected(self):
        v = np.zeros(GRID.shape)
        v[3, 3] = np.nan
        with pytest.raises(ValueError):
            GridFunction(GRID, v)

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            GridFunction.zeros(GRID) + GridFunction.zeros(PolarGrid(64, 64))


class TestIntegrateDisk:
    def test_zero(self, bumped):
        assert integrate_disk(GridFunction.zeros(GRID), bumped) == 0.0

    def test_soft_disk_area(self):
        R = 1.0
        errs = []
        for w in (0.1, 0.05, 0.025):
            profile, fn = _soft_disk(R, w)
            exact = quad(lambda r: 2 * np.pi * np.sinh(r) * profile(r), 0, 12, points=[R], limit=200)[0]
            got = integrate_disk(GridFunction.from_callable(GRID, fn))
            assert got == pytest.approx(exact, rel=1e-4)
            errs.append(abs(exact - 2 * np.pi * (np.cosh(R) - 1)))
        # the smooth profile tends to the indicator
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 2e-3 * 2 * np.pi * (np.cosh(R) - 1)

    def test_linearity(self, bumped):
        f, h = FAMILY.sample(GRID, 0), FAMILY.sample(GRID, 1)
        lhs = integrate_disk(2.5 * f - 0.75 * h, bumped)
        rhs = 2.5 * integrate_disk(f, bumped) - 0.75 * integrate_disk(h, bumped)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_inner_symmetric(self, bumped):
        f, h = FAMILY.sample(GRID, 2), FAMILY.sample(GRID, 3)
        assert inner(f, h, bumped) == pytest.approx(inner(h, f, bumped), rel=1e-14)


class TestZeroDerivatives:
    def test_constant(self):
        vr, vt = zero_derivatives(GridFunction(GRID, np.full(GRID.shape, 3.0)))
        assert np.abs(vr.values).max() <= 1e-10
        assert np.abs(vt.values).max() <= 1e-10

    def test_bdf_itself(self):
        f = GridFunction.from_callable(GRID, lambda z: 1 - np.abs(z) ** 2)
        vr, vt = zero_derivatives(f)
        r = GRID.r[:, None]
        np.testing.assert_allclose(vr.values, np.broadcast_to((1 - r**2) * (-2 * r), GRID.shape), atol=1e-6)
        assert np.abs(vt.values).max() <= 1e-10

    def test_angular_field(self):
        f = GridFunction.from_callable(GRID, lambda z: z.imag)
        _, vt = zero_derivatives(f)
        # (x / r) d_theta (r sin theta) = x cos theta
        x = 1 - GRID.r[:, None] ** 2
        np.testing.assert_allclose(vt.values, x * np.cos(GRID.theta[None, :]), atol=1e-9)

    def test_locality(self):
        f = GridFunction.from_callable(GRID, hyperbolic_bump(0.2, 0.5))
        vr, vt = zero_derivatives(f)
        inside = np.abs(f.values).max(axis=1) > 0
        lo, hi = np.nonzero(inside)[0][[0, -1]]
        rows = np.nonzero((np.abs(vr.values) + np.abs(vt.values)).max(axis=1) > 0)[0]
        # the radial stencil reaches two rows beyond the support
        assert rows.min() >= lo - 2 and rows.max() <= hi + 2

    def test_roughness_flagged(self, rng):
        f = GridFunction(GRID, rng.standard_normal(GRID.shape))
        with pytest.warns(ResolutionWarning):
            zero_derivatives(f)


class TestWeightedNorm:
    def test_zero(self):
        assert weighted_norm(GridFunction.zeros(GRID), spec=WeightedNormSpec(0.3, 1)) == 0.0

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-1e3, 1e3).filter(lambda v: abs(v) > 1e-6), st.sampled_from([-0.4, 0.0, 0.4]),
           st.sampled_from([0, 1]))
    def test_homogeneity(self, lam, delta, k):
        f = FAMILY.sample(PolarGrid(64, 64), 4)
        spec = WeightedNormSpec(delta, k)
        assert weighted_norm(lam * f, spec=spec) == pytest.approx(abs(lam) * weighted_norm(f, spec=spec), rel=1e-12)

    def test_against_fine_quadrature(self, bumped):
        fn = hyperbolic_bump(0.1 + 0.05j, 0.6)
        f = GridFunction.from_callable(GRID, fn)
        assert f.support_radius() <= 0.5
        # Gauss-Legendre in r on [0, 0.5], trapezoid in theta
        xg, wg = np.polynomial.legendre.leggauss(400)
        r = 0.25 * (xg + 1)
        wr = 0.25 * wg
        th = 2 * np.pi * np.arange(1024) / 1024
        z = r[:, None] * np.exp(1j * th[None, :])
        dens = bumped.density(z)
        exact = np.sqrt(np.sum(fn(z) ** 2 * dens * (r * wr)[:, None]) * 2 * np.pi / 1024)
        assert weighted_norm(f, bumped) == pytest.approx(exact, rel=1e-4)

    def test_monotone(self):
        f = FAMILY.sample(GRID, 5)
        h = f.with_values(0.5 * f.values * np.cos(GRID.theta)[None, :])
        assert weighted_norm(h) <= weighted_norm(f)

    def test_truncation_warning(self):
        f = GridFunction(GRID, np.ones(GRID.shape))
        with pytest.warns(ResolutionWarning):
            weighted_norm(f, spec=WeightedNormSpec(0.4, 0))

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            WeightedNormSpec(0.0, 2)

    @pytest.mark.parametrize("delta,k", [(0.25, 1), (-0.25, 1), (0.4, 0), (0.0, 0)])
    def test_bdf_change_equivalence(self, delta, k):
        grid = PolarGrid(128, 128)
        r = grid.r[grid.r <= FAMILY.r_support]
        q = 2 / (1 + r) ** 2  # ratio of the geodesic bdf to 1 - r^2
        factors = [q ** (-delta)] + ([q ** (1 - delta)] if k else [])
        lo = min(fa.min() for fa in factors)
        hi = max(fa.max() for fa in factors)
        spec = WeightedNormSpec(delta, k)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ResolutionWarning)
            ratios = np.array([weighted_norm(f, spec=spec, bdf="geodesic") / weighted_norm(f, spec=spec)
                               for f in FAMILY.samples(grid, 20)])
        assert np.all(ratios >= lo * (1 - 1e-3)) and np.all(ratios <= hi * (1 + 1e-3))
        if delta == 0 and k == 0:
            np.testing.assert_allclose(ratios, 1.0, rtol=1e-14)


class TestFiberQuadrature:
    def test_constant(self):
        assert fiber_quadrature(lambda a: np.ones_like(a)) == pytest.approx(2 * np.pi, rel=1e-15)

    def test_parity(self):
        assert abs(fiber_quadrature(np.cos)) <= 1e-12

    def test_spectral_convergence(self):
        exact = 2 * np.pi * np.i0(1.0)
        errs = [abs(fiber_quadrature(lambda a: np.exp(np.cos(a)), n) - exact) for n in (4, 6, 8, 10)]
        for a, b in zip(errs, errs[1:]):
            assert b <= 0.5 * a


class TestFamilyAndFiles:
    def test_family_deterministic_and_supported(self):
        a = TestFunctionFamily(7).sample(GRID, 3)
        b = TestFunctionFamily(7).sample(GRID, 3)
        np.testing.assert_array_equal(a.values, b.values)
        for f in FAMILY.samples(GRID, 10):
            assert np.all(f.values[GRID.r >= 0.9 * GRID.r_max] == 0)
            assert f.support_radius() <= FAMILY.r_support

    def test_support_too_large(self):
        with pytest.raises(ValueError):
            TestFunctionFamily(0, 0.95).sample(GRID, 0)

    def test_round_trip(self, tmp_path):
        f = FAMILY.sample(PolarGrid(32, 16, 0.9), 1)
        write_grid(tmp_path / "f.grid", f)
        g = read_grid(tmp_path / "f.grid")
        assert g.grid == f.grid and g.kind == f.kind
        np.testing.assert_array_equal(g.values, f.values)
        raw = (tmp_path / "f.grid").read_bytes()
        assert raw.split(b"\n", 1)[0].startswith(b'{"n_r": 32')
        assert len(raw.split(b"\n", 1)[1]) == 32 * 16 * 8

    def test_rotate(self):
        f = FAMILY.sample(GRID, 0)
        np.testing.assert_array_equal(f.rotate(GRID.n_theta).values, f.values)
