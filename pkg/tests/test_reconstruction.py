from dataclasses import replace

import numpy as np
import pytest

from ahxray.grid import GridFunction, PolarGrid, TestFunctionFamily
from ahxray.inversion import calibrate_Cn, invert_h
from ahxray.metric import AHMetric
from ahxray.normal import normal_apply_convolution, normal_apply_flow
from ahxray.reconstruction import (
    ReconstructionDiverged,
    ReconstructionReport,
    injectivity_probe,
    neumann_solve,
    stability_probe,
    stability_ratio,
)
from ahxray.xray import SinogramGeometry

GRID = PolarGrid(64, 64)
GEO = SinogramGeometry(64, 65)
FAMILY = TestFunctionFamily(0)


@pytest.fixture(scope="module")
def cal():
    return calibrate_Cn(FAMILY.samples(GRID, 5))


@pytest.fixture(scope="module")
def perturbed_run(cal):
    g = AHMetric.single_bump()
    f = FAMILY.sample(GRID, 0)
    d = normal_apply_flow(f, g, GEO, 64)
    u, rep = neumann_solve(d, g, cal, max_iter=3, tol=0.0, truth=f, geometry=GEO, n_dir=64)
    return f, u, rep


class TestNeumann:
    def test_zero_data(self, cal, bumped):
        u, rep = neumann_solve(GridFunction.zeros(GRID), bumped, cal, geometry=GEO, n_dir=64)
        assert np.all(u.values == 0)
        assert rep.residuals == [0.0] and rep.converged

    def test_hyperbolic_is_the_inverse(self, cal, hyp):
        f = FAMILY.sample(GRID, 1)
        d = normal_apply_convolution(f)
        u, rep = neumann_solve(d, hyp, cal, truth=f)
        assert len(rep.residuals) == 1 and rep.converged
        assert np.abs(u.values - invert_h(d, cal).values).max() <= 1e-12

    def test_perturbed_residuals_contract(self, perturbed_run):
        f, u, rep = perturbed_run
        assert len(rep.residuals) == 4
        assert all(b < a for a, b in zip(rep.residuals, rep.residuals[1:]))
        assert rep.mean_ratio() <= 0.5
        assert rep.errors[-1] < rep.errors[0]
        # iterates live inside 0.9 r_max
        assert np.all(u.values[GRID.r > 0.9 * GRID.r_max] == 0)

    def test_deterministic(self, cal, perturbed_run):
        f, u, rep = perturbed_run
        g = AHMetric.single_bump()
        d = normal_apply_flow(f, g, GEO, 64)
        u2, rep2 = neumann_solve(d, g, cal, max_iter=3, tol=0.0, truth=f, geometry=GEO, n_dir=64)
        np.testing.assert_array_equal(u2.values, u.values)
        assert rep2.residuals == rep.residuals

    def test_divergence_aborts(self, cal, bumped):
        f = FAMILY.sample(GRID, 0)
        d = normal_apply_flow(f, bumped, GEO, 64)
        # an inverse scaled by 3 overshoots: each step multiplies the residual by about 2
        bad = replace(cal, C_n=3 * cal.C_n)
        with pytest.raises(ReconstructionDiverged) as exc:
            neumann_solve(d, bumped, bad, max_iter=6, tol=0.0, geometry=GEO, n_dir=64)
        assert exc.value.report.ratios[-1] >= 1


class TestReport:
    def test_mean_ratio(self):
        rep = ReconstructionReport(residuals=[1.0, 0.5, 0.2, 0.125])
        assert rep.mean_ratio() == pytest.approx(0.5)
        assert rep.mean_ratio(1) == pytest.approx(0.5)
        assert ReconstructionReport(residuals=[0.0]).mean_ratio() == 0.0

    def test_json_ready(self):
        d = ReconstructionReport(residuals=[1.0, 0.25], ratios=[0.25]).as_dict()
        assert d["mean_ratio"] == pytest.approx(0.25) and d["ratios"] == [0.25]


class TestStability:
    def test_ratio_homogeneous(self, hyp):
        f = FAMILY.sample(GRID, 2)
        Nf = normal_apply_convolution(f)
        a = stability_ratio(f, Nf, hyp, 0.25)
        assert stability_ratio(-4 * f, -4 * Nf, hyp, 0.25) == pytest.approx(a, rel=1e-12)

    def test_delta_sweep_continuous(self, hyp):
        f = FAMILY.sample(GRID, 3)
        Nf = normal_apply_convolution(f)
        deltas = np.linspace(-0.45, 0.45, 19)
        vals = np.array([stability_ratio(f, Nf, hyp, d) for d in deltas])
        assert np.all(np.isfinite(vals)) and np.all(vals > 0)
        assert np.abs(np.diff(np.log(vals))).max() <= 0.2

    def test_probe_finite_and_stable(self, hyp):
        reps = stability_probe(hyp, PolarGrid(32, 32), (-0.4, 0.0, 0.4), count=6)
        for r in reps:
            assert len(r.ratios) == 6 and all(np.isfinite(r.ratios)) and min(r.ratios) > 0
            assert r.drift < 2

    def test_delta_window(self, hyp):
        with pytest.raises(ValueError):
            stability_probe(hyp, PolarGrid(32, 32), (0.5,), count=2)

    def test_injectivity(self, hyp):
        rep = injectivity_probe(hyp, PolarGrid(32, 32), count=6)
        assert rep.min_ratio > 0 and rep.drift < 2
