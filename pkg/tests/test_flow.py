import numpy as np
import pytest

from ahxray.flow import (
    BoundaryCovector,
    TraceError,
    closed_form_points,
    exit_covector,
    integrate_xbar,
    outgoing_decay_slope,
    reparametrize_t,
    trace,
)
from ahxray.hyperbolic import geodesic_from_covector
from ahxray.metric import AHMetric, Bump, ConformalPerturbation


@pytest.fixture(scope="module")
def silent_bump():
    # numerically zero perturbation: the interior integrator runs on an exactly hyperbolic metric
    return AHMetric(ConformalPerturbation((Bump((0.15, 0.1), 0.25, 1e-300),)))


def _angle_gap(a, b):
    return abs((a - b + np.pi) % (2 * np.pi) - np.pi)


class TestTrace:
    def test_diameter(self, hyp):
        geo = trace(hyp, BoundaryCovector(0.0, 0.0))
        assert np.abs(geo.z.imag).max() < 1e-12
        ex = geo.exit
        assert _angle_gap(ex.y, np.pi) < 1e-12
        assert ex.eta == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("y0,eta", [(0.0, 0.0), (0.7, 0.3), (2.5, -0.9), (5.0, 0.05)])
    def test_integrator_matches_closed_form(self, silent_bump, y0, eta):
        geo = trace(silent_bump, BoundaryCovector(y0, eta))
        assert not silent_bump.is_hyperbolic
        # traced time starts at the entry into the stitch disk
        c = np.cosh(2 * np.arctanh(silent_bump.r_stitch))
        t0 = -np.arccosh(c / geodesic_from_covector(y0, eta).P[0])
        assert np.abs(geo.z - closed_form_points(geo.entry, geo.t + t0)).max() < 1e-8

    @pytest.mark.parametrize("y0,eta", [(0.3, 0.0), (1.0, 0.5), (4.0, -2.0), (2.0, 15.0)])
    def test_exit_matches_arc_endpoint(self, hyp, y0, eta):
        ex = trace(hyp, BoundaryCovector(y0, eta)).exit
        assert _angle_gap(ex.y, geodesic_from_covector(y0, eta).exit_angle) < 1e-6
        assert ex.eta == pytest.approx(eta, abs=1e-9)

    def test_eta_zero_exit(self, hyp):
        for y0 in (0.0, 1.0, 3.0):
            assert _angle_gap(trace(hyp, BoundaryCovector(y0, 0.0)).exit.y, y0 + np.pi) < 1e-12

    @pytest.mark.parametrize("eta", [0.0, 0.2, -0.4])
    def test_reversal(self, bumped, eta):
        bc = BoundaryCovector(0.3, eta)
        ex = trace(bumped, bc).exit
        back = trace(bumped, BoundaryCovector(ex.y, -ex.eta)).exit
        assert _angle_gap(back.y, bc.y) < 1e-6
        assert back.eta == pytest.approx(-eta, abs=1e-6)

    def test_perturbation_bends_geodesic(self, hyp, bumped):
        bc = BoundaryCovector(0.3, 0.2)
        assert _angle_gap(trace(bumped, bc).exit.y, trace(hyp, bc).exit.y) > 1e-4

    def test_constraint_and_conservation(self, bumped, silent_bump):
        tol = 1e-10
        geo = trace(bumped, BoundaryCovector(1.0, 0.3), tol=tol)
        assert np.abs(geo.constraint).max() <= 10 * tol
        geo = trace(silent_bump, BoundaryCovector(1.0, 0.3), tol=tol)
        assert np.abs(geo.eta - 0.3).max() <= 10 * tol

    def test_sample_structure(self, bumped):
        geo = trace(bumped, BoundaryCovector(2.0, -0.1))
        assert np.all(np.diff(geo.tau) > 0)
        assert geo.tau_plus > geo.tau[-1]
        assert geo.x[0] < 1e-6 and geo.x[-1] < 1e-6

    def test_deterministic(self, bumped):
        a = trace(bumped, BoundaryCovector(0.5, 0.25))
        b = trace(bumped, BoundaryCovector(0.5, 0.25))
        np.testing.assert_array_equal(a.z, b.z)
        np.testing.assert_array_equal(a.tau, b.tau)

    def test_invalid_tolerance(self, hyp):
        with pytest.raises(ValueError):
            trace(hyp, BoundaryCovector(0.0, 0.0), tol=0.0)

    def test_exit_requires_truncation(self, hyp):
        geo = trace(hyp, BoundaryCovector(0.0, 0.0))
        geo.x[-1] = 0.5
        with pytest.raises(TraceError):
            exit_covector(geo)

    def test_nonfinite_covector(self):
        with pytest.raises(ValueError):
            BoundaryCovector(np.nan, 0.0)


class TestAsymptotics:
    def test_tau_plus(self, hyp):
        errs = []
        for eta in (20.0, 40.0, 80.0):
            geo = trace(hyp, BoundaryCovector(0.0, eta))
            errs.append(abs(geo.tau_plus * eta / np.pi - 1))
        assert max(errs) <= 0.02
        assert errs[0] > errs[1] > errs[2]

    def test_xbar_orbit_tau_plus(self, hyp, bumped):
        for g in (hyp, bumped):
            orb = integrate_xbar(g, BoundaryCovector(0.5, 40.0))
            assert orb.tau_plus * 40 / np.pi == pytest.approx(1.0, abs=0.02)
            assert orb.constraint_drift < 1e-9

    def test_xbar_orbit_rejects_interior(self, bumped):
        with pytest.raises(ValueError):
            integrate_xbar(bumped, BoundaryCovector(0.0, 0.5))

    def test_x_profile_single_maximum(self, hyp):
        eta = 40.0
        geo = trace(hyp, BoundaryCovector(0.0, eta))
        k = int(np.argmax(geo.x))
        assert np.all(np.diff(geo.x[: k + 1]) > 0) and np.all(np.diff(geo.x[k:]) < 0)
        assert abs(geo.x[k] * eta - 1) <= 2 / eta

    def test_decay_slope(self, hyp, bumped):
        for g in (hyp, bumped):
            for eta in (0.0, 0.5, 20.0):
                assert outgoing_decay_slope(trace(g, BoundaryCovector(0.2, eta))) == pytest.approx(-1.0, abs=0.01)


class TestReparametrize:
    def test_recovers_unit_speed_time(self, bumped):
        geo = trace(bumped, BoundaryCovector(1.0, 0.2))
        t = reparametrize_t(geo)
        assert np.all(np.diff(t) > 0)
        # trapezoid in tau of 1/x: second order in the step
        assert np.abs(t - geo.t).max() < 1e-3

    def test_diameter_midpoint_symmetry(self, hyp):
        geo = trace(hyp, BoundaryCovector(0.0, 0.0))
        t = reparametrize_t(geo)
        k = int(np.argmin(np.abs(geo.z)))
        assert t[k] == pytest.approx(0.5 * (t[0] + t[-1]), abs=1e-6)

    def test_logarithmic_growth(self, hyp):
        geo = trace(hyp, BoundaryCovector(0.0, 0.0))
        t = reparametrize_t(geo)
        # near the boundary x ~ 2 exp(-|t|)
        assert t[-1] == pytest.approx(np.log(2 / geo.x[-1]), abs=1e-2)
