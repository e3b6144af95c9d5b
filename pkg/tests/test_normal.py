import numpy as np
import pytest

from ahxray.grid import GridFunction, PolarGrid, TestFunctionFamily, hyperbolic_bump, inner
from ahxray.hyperbolic import dist_z
from ahxray.metric import AHMetric
from ahxray.normal import (
    decay_order_fit,
    kernel_formula_check,
    model_bump,
    model_operator_probe,
    normal_apply_convolution,
    normal_apply_flow,
    normal_at,
    two_point_distance,
)
from ahxray.xray import SinogramGeometry

GRID = PolarGrid(128, 128)
FAMILY = TestFunctionFamily(0)


@pytest.fixture(scope="module")
def conv_images():
    fs = FAMILY.samples(GRID, 3)
    return fs, normal_apply_convolution(fs)


class TestFlowRealization:
    def test_zero(self, hyp):
        out = normal_apply_flow(GridFunction.zeros(PolarGrid(32, 32)), hyp, SinogramGeometry(32, 33), n_dir=32)
        assert np.all(out.values == 0)

    def test_radial_stays_radial(self, hyp):
        f = GridFunction.from_callable(GRID, hyperbolic_bump(0, 1.2))
        out = normal_apply_flow(f, hyp).values
        rows = out.max(axis=1) > 0
        assert np.std(out[rows], axis=1).max() <= 1e-6 * np.abs(out).max()

    def test_matches_convolution(self, hyp, conv_images):
        fs, Ns = conv_images
        flows = normal_apply_flow(fs, hyp)
        inside = GRID.r <= 0.9 * GRID.r_max
        for a, b in zip(flows, Ns):
            err = np.linalg.norm((a.values - b.values)[inside]) / np.linalg.norm(b.values[inside])
            assert err <= 2e-2

    def test_self_adjoint_and_psd(self, bumped):
        grid = PolarGrid(64, 64)
        f, h = FAMILY.samples(grid, 2)
        Nf, Nh = normal_apply_flow([f, h], bumped, SinogramGeometry(128, 129), n_dir=128)
        a, b = inner(Nf, h, bumped), inner(f, Nh, bumped)
        assert abs(a - b) <= 1e-3 * max(abs(a), abs(b))
        assert inner(Nf, f, bumped) >= -1e-6 * inner(f, f, bumped)


class TestConvolution:
    def test_zero(self):
        assert np.all(normal_apply_convolution(GridFunction.zeros(GRID)).values == 0)

    def test_rotation_equivariance(self, conv_images):
        fs, Ns = conv_images
        k = 17
        rot = normal_apply_convolution(fs[0].rotate(k))
        assert np.abs(rot.values - Ns[0].rotate(k).values).max() <= 1e-8 * np.abs(Ns[0].values).max()

    def test_positivity(self):
        f = GridFunction.from_callable(GRID, hyperbolic_bump(0.3, 0.8))
        out = normal_apply_convolution(f)
        k = np.argmin(np.abs(GRID.z - 0.3))
        assert out.values.ravel()[k] > 0
        assert out.values.min() > -1e-10 * out.values.max()

    def test_self_adjoint_and_psd(self, conv_images, hyp):
        fs, Ns = conv_images
        a, b = inner(Ns[0], fs[1], hyp), inner(fs[0], Ns[1], hyp)
        assert abs(a - b) <= 1e-3 * max(abs(a), abs(b))
        for f, Nf in zip(fs, Ns):
            assert inner(Nf, f, hyp) >= -1e-6 * inner(f, f, hyp)

    def test_pointwise_agrees(self, hyp, conv_images):
        fs, Ns = conv_images
        i, j = 40, 9
        z = GRID.z[i, j]
        assert normal_at(fs[0], hyp, z) == pytest.approx(Ns[0].values[i, j], rel=2e-3)


class TestKernelFormula:
    def test_hyperbolic_pairs(self, hyp, rng):
        checked = 0
        while checked < 10:
            z, zt = 0.7 * np.sqrt(rng.uniform(size=2)) * np.exp(2j * np.pi * rng.uniform(size=2))
            if not 0.2 <= dist_z(z, zt) <= 3.0:
                continue
            val, ref = kernel_formula_check(hyp, z, zt)
            assert val == pytest.approx(ref, rel=1e-3)
            checked += 1

    def test_symmetry(self, bumped):
        z, zt = 0.1 + 0.3j, -0.2 - 0.1j
        a, _ = kernel_formula_check(bumped, z, zt)
        b, _ = kernel_formula_check(bumped, zt, z)
        assert a == pytest.approx(b, rel=1e-6)

    def test_small_perturbation_continuity(self):
        g = AHMetric.single_bump(0.02)
        z = -0.3 + 0.0j
        zt = np.tanh(np.arctanh(0.3) + 0.5) + 0.0j  # hyperbolic distance 1 along the real axis
        val, ref = kernel_formula_check(g, z, zt)
        assert abs(val / ref - 1) <= 0.10

    def test_out_of_range(self, hyp):
        with pytest.raises(ValueError):
            kernel_formula_check(hyp, 0.0, 0.01)

    def test_shooting_matches_closed_form_off_support(self, bumped):
        z1, z2 = -0.8 + 0.0j, -0.6 - 0.5j
        assert two_point_distance(bumped, z1, z2) == pytest.approx(dist_z(z1, z2), rel=1e-9)


class TestDecay:
    def test_hyperbolic_exponent(self, hyp):
        f = GridFunction.from_callable(GRID, hyperbolic_bump(0.1, 0.8))
        slope, _, vals = decay_order_fit(hyp, f)
        assert slope == pytest.approx(1.0, abs=0.05)
        slope2, _, vals2 = decay_order_fit(hyp, 2 * f)
        np.testing.assert_allclose(vals2, 2 * vals, rtol=1e-12)
        assert slope2 == pytest.approx(slope, abs=1e-12)

    def test_perturbed_exponent(self, bumped):
        f = GridFunction.from_callable(GRID, hyperbolic_bump(0.1, 0.8))
        slope, _, _ = decay_order_fit(bumped, f, theta0=2.0)
        assert slope == pytest.approx(1.0, abs=0.1)


class TestModelProbe:
    def test_hyperbolic_discretization_only(self, hyp):
        rep = model_operator_probe(hyp, 0.0, n_dir=64)
        assert np.all(rep.discrepancy <= 5e-2)

    def test_linearity(self, hyp):
        a = model_operator_probe(hyp, 1.0, radii=(0.2,), n_dir=32)
        b = model_operator_probe(hyp, 1.0, radii=(0.2,), n_dir=32, fn=lambda zeta: 2 * model_bump(zeta))
        np.testing.assert_allclose(b.values, 2 * a.values, rtol=1e-12)
        np.testing.assert_allclose(b.reference, 2 * a.reference, rtol=1e-12)
