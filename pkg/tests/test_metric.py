import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ahxray.flow import BoundaryCovector, trace
from ahxray.metric import (
    AHMetric,
    Bump,
    ConformalPerturbation,
    PhaseState,
    _jacobi_integrate,
    bdf_eval,
    certify_simple,
    jacobi_simplicity_check,
    metric_eval,
    xbar_field,
)

from conftest import random_disk_points


class TestMetricEval:
    def test_center_of_unperturbed_disk(self, hyp):
        G, dens = metric_eval(hyp, 0j)
        np.testing.assert_array_equal(G, 4 * np.eye(2))
        assert dens == 4.0

    def test_density_is_sqrt_det(self, bumped, rng):
        z = random_disk_points(rng, 50)
        G, dens = metric_eval(bumped, z)
        np.testing.assert_allclose(np.sqrt(np.linalg.det(G)), dens, rtol=1e-13)
        psi = bumped.perturbation.psi(z)
        np.testing.assert_allclose(dens, np.exp(2 * psi) * 4 / (1 - np.abs(z) ** 2) ** 2, rtol=1e-14)

    def test_outside_support_identical(self, hyp, bumped, rng):
        r = bumped.r_psi + (0.999 - bumped.r_psi) * rng.uniform(size=200)
        z = r * np.exp(2j * np.pi * rng.uniform(size=200))
        G1, d1 = metric_eval(bumped, z)
        G0, d0 = metric_eval(hyp, z)
        np.testing.assert_array_equal(d1, d0)
        np.testing.assert_array_equal(G1, G0)
        np.testing.assert_allclose(bumped.gauss_curvature(z), -1.0, atol=1e-14)

    def test_doubling_psi_squares_factor(self, hyp, rng):
        z = random_disk_points(rng, 50, 0.5)
        g1 = AHMetric.single_bump(0.05)
        g2 = AHMetric.single_bump(0.10)
        f0 = hyp.density(z)
        np.testing.assert_allclose(g2.density(z) / f0, (g1.density(z) / f0) ** 2, rtol=1e-13)

    def test_boundary_rejected(self, hyp):
        with pytest.raises(ValueError):
            metric_eval(hyp, 1.0 + 0j)

    def test_positive_definite(self, bumped, rng):
        G, _ = metric_eval(bumped, random_disk_points(rng, 100, 0.99))
        assert np.all(np.linalg.eigvalsh(G) > 0)


class TestPerturbation:
    def test_support(self, bumped, rng):
        assert bumped.r_psi == pytest.approx(np.hypot(0.15, 0.1) + 0.25)
        z = random_disk_points(rng, 2000, 0.99)
        out = np.abs(z) >= bumped.r_psi
        assert np.all(bumped.perturbation.psi(z[out]) == 0)

    def test_bounds(self, bumped, rng):
        z = random_disk_points(rng, 5000, 0.6)
        psi = bumped.perturbation.psi(z)
        assert np.abs(psi).max() <= bumped.perturbation.amplitude_bound
        assert np.all(np.isfinite(bumped.perturbation.grad_psi(z)))
        assert np.all(np.isfinite(bumped.perturbation.laplacian_psi(z)))

    def test_derivatives_against_finite_differences(self, rng):
        b = Bump((0.1, -0.05), 0.3, 0.07)
        z = 0.1 - 0.05j + 0.2 * np.exp(2j * np.pi * rng.uniform(size=20)) * rng.uniform(size=20)
        h = 1e-5
        gx = (b.value(z + h) - b.value(z - h)) / (2 * h)
        gy = (b.value(z + 1j * h) - b.value(z - 1j * h)) / (2 * h)
        np.testing.assert_allclose(b.gradient(z), gx + 1j * gy, atol=1e-8)
        h = 1e-4
        lap = (b.value(z + h) + b.value(z - h) + b.value(z + 1j * h) + b.value(z - 1j * h) - 4 * b.value(z)) / h**2
        np.testing.assert_allclose(b.laplacian(z), lap, atol=1e-5)

    def test_bump_must_fit(self):
        with pytest.raises(ValueError):
            Bump((0.5, 0.0), 0.5, 0.1)

    def test_curvature_tends_to_minus_one(self, bumped):
        z = 0.999 * np.exp(1j * np.linspace(0, 2 * np.pi, 32, endpoint=False))
        np.testing.assert_allclose(bumped.gauss_curvature(z), -1.0, atol=1e-3)


class TestBdf:
    def test_values(self):
        assert bdf_eval(1.0 + 0j) == 0.0
        assert bdf_eval(0j) == 1.0

    def test_simple_vanishing(self):
        h = 1e-6
        d = (bdf_eval(1.0 + 0j) - bdf_eval(1.0 - h + 0j)) / h
        assert d == pytest.approx(-2.0, abs=1e-5)


def _constraint_derivative(x, zbar, eta, field):
    # d/dtau (zbar^2 + x^2 eta^2 (1 - x^2/4)^-2) by the chain rule
    dx, dy, dzbar, deta = field
    q = 1.0 - x * x / 4.0
    d_dx = 2 * x * eta**2 / q**2 + x**2 * eta**2 * x / q**3
    d_deta = 2 * x**2 * eta / q**2
    return 2 * zbar * dzbar + d_dx * dx + d_deta * deta


class TestXbarField:
    def test_transversal_at_boundary(self, hyp):
        for y, eta in [(0.0, 0.0), (1.3, 50.0), (4.0, -7.0)]:
            dx, _, _, deta = xbar_field(hyp, PhaseState(0.0, y, 1.0, eta))
            assert dx == 1.0
            assert deta == 0.0

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.0, 1.5), st.floats(-30, 30), st.floats(0, 2 * np.pi), st.booleans())
    def test_constraint_preserved(self, x, eta, y, up):
        lhs = x * x * eta * eta / (1 - x * x / 4) ** 2
        if lhs > 1:
            return
        zbar = np.sqrt(1 - lhs) * (1 if up else -1)
        F = xbar_field(AHMetric.hyperbolic(), PhaseState(x, y, zbar, eta))
        assert abs(_constraint_derivative(x, zbar, eta, F)) <= 1e-10

    def test_violation_reported(self, hyp):
        with pytest.raises(ValueError):
            xbar_field(hyp, PhaseState(0.1, 0.0, 0.5, 0.0))

    def test_collar_only(self, bumped):
        with pytest.raises(ValueError):
            xbar_field(bumped, PhaseState(1.0, 0.0, 1.0, 0.0))


class TestJacobi:
    def test_sinh_solution(self):
        dt = 1e-3
        K = -np.ones(int(5 / dt) + 1)
        Y, _ = _jacobi_integrate(K, dt, 0.0, 1.0)
        t = 2 * dt * np.arange(len(Y))
        np.testing.assert_allclose(Y, np.sinh(t), rtol=1e-6, atol=1e-9)

    def test_hyperbolic_no_conjugate_points(self, hyp):
        for eta in (0.0, 0.7, -2.0):
            rep = jacobi_simplicity_check(hyp, trace(hyp, BoundaryCovector(0.4, eta)))
            assert rep.conjugate_points == []
            assert not rep.boundary_conjugate
            assert rep.sinh_ratio_spread <= 0.02

    def test_small_bump_certified(self, bumped):
        ok, reports = certify_simple(bumped)
        assert ok
        assert len(reports) == 50

    def test_strong_bump_still_evaluates(self):
        g = AHMetric(ConformalPerturbation((Bump((0.0, 0.0), 0.3, 0.3),)))
        rep = jacobi_simplicity_check(g, trace(g, BoundaryCovector(0.0, 0.1), check_simple=False))
        assert np.isfinite(rep.end_growth)
