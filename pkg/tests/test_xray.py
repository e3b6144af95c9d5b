import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from ahxray.grid import GridFunction, PolarGrid, TestFunctionFamily, hyperbolic_bump, integrate_disk, inner
from ahxray.xray import (
    Sinogram,
    SinogramGeometry,
    adjoint_at,
    backproject,
    boundary_inner,
    boundedness_probe,
    forward,
    read_sinogram,
    restriction_norm_equivalence,
    santalo_check,
    weight_asymptotics,
    write_sinogram,
)

GRID = PolarGrid(128, 128)
FAMILY = TestFunctionFamily(0)


def _radial(grid, R=1.5):
    return GridFunction.from_callable(grid, hyperbolic_bump(0, R))


class TestForward:
    def test_zero(self, bumped):
        u = forward(GridFunction.zeros(GRID), bumped, SinogramGeometry(16, 17))
        assert np.all(u.values == 0)

    def test_radial_column_constancy(self, hyp):
        u = forward(_radial(GRID), hyp, SinogramGeometry(32, 33))
        assert np.abs(u.values - u.values[:1]).max() <= 1e-8
        # and even in eta
        np.testing.assert_allclose(u.values, u.values[:, ::-1], atol=1e-8)

    def test_diameter_against_1d_quadrature(self, hyp):
        R = 1.5
        exact = 2 * quad(lambda r: np.exp(1 - 1 / (1 - (r / R) ** 2)), 0, R, limit=200)[0]
        u = forward(_radial(PolarGrid(256, 256), R), hyp, SinogramGeometry(8, 33))
        assert np.abs(u.values[:, 16] / exact - 1).max() <= 1e-5

    def test_linearity(self, bumped):
        geo = SinogramGeometry(16, 33)
        f, h = FAMILY.sample(GRID, 0), FAMILY.sample(GRID, 1)
        lhs = forward(2.0 * f - 3.0 * h, bumped, geo).values
        rhs = 2.0 * forward(f, bumped, geo).values - 3.0 * forward(h, bumped, geo).values
        assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(rhs).max())

    def test_list_input_matches_single(self, bumped):
        geo = SinogramGeometry(8, 17)
        fs = FAMILY.samples(GRID, 2)
        many = forward(fs, bumped, geo)
        for f, u in zip(fs, many):
            np.testing.assert_array_equal(u.values, forward(f, bumped, geo).values)

    def test_decay_in_eta(self, bumped):
        u = forward(FAMILY.sample(GRID, 2), bumped, SinogramGeometry(16, 65))
        assert np.all(u.values[:, [0, -1]] == 0)

    def test_support_violation(self, hyp):
        with pytest.raises(ValueError):
            forward(GridFunction(GRID, np.ones(GRID.shape)), hyp, SinogramGeometry(8, 9))


class TestAdjoint:
    def test_constant_sinogram(self, bumped, rng):
        geo = SinogramGeometry(16, 17)
        u = Sinogram(geo, np.ones((16, 17)))
        z = 0.6 * rng.uniform(size=5) * np.exp(2j * np.pi * rng.uniform(size=5))
        np.testing.assert_allclose(adjoint_at(u, bumped, z, n_dir=64), 2 * np.pi, rtol=1e-12)

    def test_adjoint_identity(self, hyp):
        geo = SinogramGeometry(128, 129)
        f = FAMILY.sample(GRID, 3)
        eta_c = 1.5
        u = Sinogram.from_callable(geo, lambda y, e: np.exp(-((e - 0.3) / eta_c) ** 2) * (1 + 0.5 * np.cos(y - 0.4)))
        lhs = boundary_inner(u, forward(f, hyp, geo))
        rhs = inner(backproject(u, hyp, GRID, n_dir=256), f, hyp)
        assert abs(lhs - rhs) <= 1e-3 * abs(lhs)

    def test_rotation_equivariance(self, hyp):
        n = 64
        grid = PolarGrid(32, n)
        geo = SinogramGeometry(n, 33)
        u = Sinogram.from_callable(geo, lambda y, e: np.exp(-e * e) * (2 + np.sin(y) + np.cos(3 * y)))
        k = 5
        rot = u.with_values(np.roll(u.values, k, axis=0))
        a = backproject(rot, hyp, grid, n_dir=64).values
        b = backproject(u, hyp, grid, n_dir=64).rotate(k).values
        assert np.abs(a - b).max() <= 1e-8

    def test_list_input(self, hyp):
        geo = SinogramGeometry(16, 17)
        us = [Sinogram(geo, np.ones((16, 17))), Sinogram(geo, 2 * np.ones((16, 17)))]
        out = backproject(us, hyp, PolarGrid(16, 16), n_dir=32)
        np.testing.assert_allclose(out[1].values, 2 * out[0].values, rtol=1e-14)


class TestSantalo:
    def test_zero(self, hyp):
        assert santalo_check(GridFunction.zeros(GRID), hyp, SinogramGeometry(16, 17)) == (0.0, 0.0, 0.0)

    def test_gap_and_linearity(self, hyp):
        f = FAMILY.sample(PolarGrid(256, 256), 0)
        lhs, rhs, gap = santalo_check(f, hyp)
        assert gap <= 1e-3
        assert lhs == pytest.approx(2 * np.pi * integrate_disk(f, hyp))
        lhs2, rhs2, _ = santalo_check(2 * f, hyp)
        assert lhs2 == pytest.approx(2 * lhs, rel=1e-12) and rhs2 == pytest.approx(2 * rhs, rel=1e-12)

    def test_short_eta_window_rejected(self, hyp):
        # geodesics beyond eta_max must miss the support, otherwise the tails are not exact
        with pytest.raises(ValueError, match="eta_max"):
            santalo_check(FAMILY.sample(GRID, 0), hyp, SinogramGeometry(16, 33, 0.5))


class TestWeights:
    @pytest.mark.parametrize("delta", [-0.25, -0.4])
    def test_slope(self, hyp, delta):
        slope, _ = weight_asymptotics(delta, hyp)
        assert slope == pytest.approx(2 * delta, rel=0.03)

    def test_monotone(self, hyp):
        slopes = [weight_asymptotics(d, hyp)[0] for d in (-0.4, -0.25, -0.1)]
        assert slopes[0] < slopes[1] < slopes[2]

    def test_nonnegative_delta_rejected(self, hyp):
        with pytest.raises(ValueError):
            weight_asymptotics(0.0, hyp)


class TestNormDiagnostics:
    def test_zero(self, hyp):
        inside, bnd, _ = restriction_norm_equivalence(GridFunction.zeros(GRID), -0.25, hyp, SinogramGeometry(32, 33),
                                                      n_rho=8, n_theta=8, n_dir=16)
        assert inside == 0.0 and bnd == 0.0

    def test_ratio_scale_invariant_and_bounded(self, hyp):
        geo = SinogramGeometry(64, 65)
        kw = dict(n_rho=24, n_theta=32, n_dir=64)
        ratios = []
        for k in range(10):
            f = FAMILY.sample(GRID, k)
            ratios.append(restriction_norm_equivalence(f, -0.25, hyp, geo, **kw)[2])
        r3 = restriction_norm_equivalence(3.0 * FAMILY.sample(GRID, 0), -0.25, hyp, geo, **kw)[2]
        assert r3 == pytest.approx(ratios[0], rel=1e-10)
        assert max(ratios) / min(ratios) <= 3.0

    def test_boundedness_probe(self, hyp):
        geo = SinogramGeometry(64, 65)
        coarse = boundedness_probe(hyp, FAMILY, PolarGrid(64, 64), count=20, geometry=geo)
        fine = boundedness_probe(hyp, FAMILY, GRID, count=20, geometry=geo)
        assert np.all(np.isfinite(coarse)) and np.all(coarse > 0)
        assert abs(fine.max() / coarse.max() - 1) < 0.5


class TestFiles:
    def test_round_trip(self, tmp_path):
        geo = SinogramGeometry(8, 9, 50.0)
        u = Sinogram.from_callable(geo, lambda y, e: np.sin(y) * np.exp(-abs(e)))
        write_sinogram(tmp_path / "u.sino", u)
        v = read_sinogram(tmp_path / "u.sino")
        assert v.geometry == geo
        np.testing.assert_array_equal(v.values, u.values)

    def test_geometry_symmetric(self):
        eta = SinogramGeometry().eta
        np.testing.assert_allclose(eta, -eta[::-1], atol=1e-12)
        assert eta.max() == pytest.approx(200.0)


def test_forward_warning_free(hyp):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        forward(FAMILY.sample(GRID, 0), hyp, SinogramGeometry(8, 9))
