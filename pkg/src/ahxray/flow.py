"""Geodesic tracing from incoming boundary covectors.

A geodesic is sampled at uniform unit-speed times ``t = k * dt``.  On the
exactly hyperbolic collar the samples come from the hyperboloid closed
form; inside the stitch disk the Hamiltonian equations are integrated by
an adaptive Dormand-Prince 5(4) scheme with dense output.  Each sample also
carries its collar coordinates ``(x, y, zeta_bar, eta)`` and the rescaled
flow time ``tau`` with ``d tau = x dt``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import _kernels
from .hyperbolic import geodesic_from_covector, hyperboloid_project
from .metric import (
    PhaseState,
    certify_simple,
    collar_state,
    geodesic_bdf,
    radius_from_geodesic_bdf,
    xbar_components,
    xbar_field,
)

__all__ = [
    "BoundaryCovector",
    "Geodesic",
    "XbarOrbit",
    "TraceError",
    "trace",
    "reparametrize_t",
    "exit_covector",
    "integrate_xbar",
    "outgoing_decay_slope",
    "line_anchor",
    "line_anchors",
    "X_MIN",
]

X_MIN = 1e-6


class TraceError(RuntimeError):
    """Raised when a geodesic cannot be followed to the boundary."""


@dataclass(frozen=True)
class BoundaryCovector:
    y: float
    eta: float

    def __post_init__(self):
        if not (np.isfinite(self.y) and np.isfinite(self.eta)):
            raise ValueError("boundary covector must be finite")
        object.__setattr__(self, "y", float(np.mod(self.y, 2 * np.pi)))
        object.__setattr__(self, "eta", float(self.eta))


@dataclass
class Geodesic:
    """Samples of one traced geodesic, ordered from entry to exit."""

    t: np.ndarray
    tau: np.ndarray
    z: np.ndarray
    p: np.ndarray
    x: np.ndarray
    y: np.ndarray
    zbar: np.ndarray
    eta: np.ndarray
    weight: np.ndarray
    constraint: np.ndarray
    tau_plus: float
    entry: BoundaryCovector

    @property
    def exit(self):
        return exit_covector(self)

    def state(self, k):
        return PhaseState(self.x[k], self.y[k], self.zbar[k], self.eta[k])

    def __len__(self):
        return len(self.t)


def line_anchor(g, y0, eta):
    """A point and unit velocity on the incoming part of the geodesic ``(y0, eta)``.

    For lines meeting the stitch disk the anchor is the entry point into
    it, so that everything before the anchor is exactly hyperbolic.
    """
    geo = geodesic_from_covector(y0, eta)
    t0 = 0.0
    if not g.is_hyperbolic:
        c = np.cosh(2 * np.arctanh(g.r_stitch))
        if geo.P[0] < c:
            t0 = -np.arccosh(c / geo.P[0])
    z = complex(geo.point(t0))
    v = complex(geo.velocity(t0))
    return z, v


def line_anchors(g, y0, eta):
    """Vectorized :func:`line_anchor`; returns ``(m, 2)`` points and unit velocities."""
    y0 = np.asarray(y0, dtype=float).ravel()
    eta = np.asarray(eta, dtype=float).ravel()
    d = np.arcsinh(eta)
    beta = y0 + np.arccos(np.tanh(d))
    P = np.stack([np.cosh(d), np.sinh(d) * np.cos(beta), np.sinh(d) * np.sin(beta)])
    V = np.stack([np.zeros_like(d), -np.sin(beta), np.cos(beta)])
    t0 = np.zeros_like(d)
    if not g.is_hyperbolic:
        c = np.cosh(2 * np.arctanh(g.r_stitch))
        m = P[0] < c
        t0[m] = -np.arccosh(c / P[0][m])
    X = np.cosh(t0) * P + np.sinh(t0) * V
    D = np.sinh(t0) * P + np.cosh(t0) * V
    den = 1.0 + X[0]
    z = (X[1] + 1j * X[2]) / den
    v = (D[1] + 1j * D[2]) / den - (X[1] + 1j * X[2]) * D[0] / den**2
    pts = np.ascontiguousarray(np.stack([z.real, z.imag], axis=1))
    dirs = np.ascontiguousarray(np.stack([v.real, v.imag], axis=1))
    return pts, dirs


def _ray(g, z, v, dt, r_cut, tol, t_budget, max_nodes):
    buf = np.empty((max_nodes, 4))
    n, status = _kernels.ray_nodes(
        z.real, z.imag, v.real, v.imag, dt, r_cut, g.bump_array(), g.r_stitch, tol, t_budget, buf, True
    )
    if status == _kernels.STATUS_TRAPPED:
        raise TraceError("geodesic did not leave the perturbed region: suspected trapping")
    if status == _kernels.STATUS_UNDERFLOW:
        raise TraceError("step size underflow while integrating the geodesic")
    if status == _kernels.STATUS_BUFFER:
        raise TraceError("geodesic sample buffer exhausted")
    return buf[:n]


def trace(g, bc, tol=1e-10, dt=0.01, x_min=X_MIN, t_budget=50.0, check_simple=True):
    """Trace the geodesic entering at ``bc`` until both ends reach ``x < x_min``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if check_simple and not g.is_hyperbolic:
        ok, _ = certify_simple(g)
        if not ok:
            raise TraceError("metric failed the simplicity certificate")
    r_cut = float(radius_from_geodesic_bdf(x_min))
    max_nodes = int((2 * np.log(4.0 / x_min) + t_budget) / dt) + 16
    z0, v0 = line_anchor(g, bc.y, bc.eta)
    fwd = _ray(g, z0, v0, dt, r_cut, tol, t_budget, max_nodes)
    bwd = _ray(g, z0, -v0, dt, r_cut, tol, t_budget, max_nodes)
    bwd = bwd[1:][::-1].copy()
    bwd[:, 2:] *= -1.0
    nodes = np.concatenate([bwd, fwd])
    t = dt * (np.arange(len(nodes)) - (len(bwd)))
    z = nodes[:, 0] + 1j * nodes[:, 1]
    p = nodes[:, 2] + 1j * nodes[:, 3]
    x, y, zbar, eta = collar_state(z, p)
    # unit cosphere residual of g, equal to zbar^2 + x^2 |eta|^2 - 1 on the collar
    constraint = np.exp(-2 * g.log_conformal(z)) * np.abs(p) ** 2 - 1.0
    # near the boundary x ~ tau, which supplies the missing end pieces
    tau = x[0] + np.concatenate([[0.0], np.cumsum(0.5 * (x[1:] + x[:-1]) * dt)])
    tau_plus = float(tau[-1] + x[-1])
    weight = np.full(len(t), dt)
    return Geodesic(t, tau, z, p, x, y, zbar, eta, weight, constraint, tau_plus, bc)


def reparametrize_t(geo):
    """Unit-speed time recovered from ``tau`` by cumulative quadrature of ``d tau / x``."""
    inv = 1.0 / geo.x
    dtau = np.diff(geo.tau)
    t = np.concatenate([[0.0], np.cumsum(0.5 * (inv[1:] + inv[:-1]) * dtau)])
    return t + geo.t[0]


def exit_covector(geo, x_min=X_MIN):
    """Extrapolate the last sample to ``x = 0``.

    Near the boundary ``dx/dtau = zeta_bar = -1`` and
    ``dy/dtau = x eta (1 + O(x^2))``, hence ``y(0) = y + eta x^2 / 2``.
    """
    x, y, eta = geo.x[-1], geo.y[-1], geo.eta[-1]
    if x > x_min:
        raise TraceError("final sample is not within the boundary truncation")
    return BoundaryCovector(y + 0.5 * eta * x * x, eta)


def outgoing_decay_slope(geo, offset=3.0):
    """Least-squares slope of ``log x`` against ``t`` on the outgoing tail.

    The tail starts ``offset`` units after the deepest point, where the
    slope of ``log x`` for a hyperbolic geodesic is already ``-tanh(offset)``.
    """
    t = geo.t
    t_top = t[int(np.argmax(geo.x))]
    tail = t >= t_top + offset
    if tail.sum() < 10:
        raise ValueError("outgoing tail too short for a slope fit")
    return float(np.polyfit(t[tail], np.log(geo.x[tail]), 1)[0])


@dataclass
class XbarOrbit:
    tau: np.ndarray
    x: np.ndarray
    y: np.ndarray
    zbar: np.ndarray
    eta: np.ndarray
    tau_plus: float
    constraint_drift: float


def integrate_xbar(g, bc, rtol=1e-12, atol=1e-14):
    """Integrate the rescaled field from ``x = 0`` until the orbit returns to ``x = 0``.

    Only valid for orbits staying in the collar, i.e. for ``|eta|`` large
    enough that the geodesic misses the perturbation.
    """
    d = np.arcsinh(abs(bc.eta))
    x_top = 2.0 * np.exp(-d)
    if not g.is_hyperbolic and x_top >= geodesic_bdf(g.r_psi):
        raise ValueError("orbit enters the perturbed region; the collar form does not apply")

    xbar_field(g, PhaseState(0.0, bc.y, 1.0, bc.eta))

    def rhs(_, s):
        return xbar_components(max(s[0], 0.0), s[1], s[2], s[3])

    def hit(_, s):
        return s[0]

    hit.terminal = True
    hit.direction = -1
    # the pure-hyperbolic orbit has tau_plus ~ pi/|eta|; leave ample room
    span = 10.0 * np.pi / max(abs(bc.eta), 1e-3) + 10.0
    sol = solve_ivp(
        rhs,
        (0.0, span),
        [0.0, bc.y, 1.0, bc.eta],
        method="DOP853",
        rtol=rtol,
        atol=atol,
        events=hit,
        dense_output=False,
        max_step=np.pi / max(abs(bc.eta), 1.0) / 50,
        first_step=1e-4 / max(abs(bc.eta), 1.0),
    )
    if sol.status != 1:
        raise TraceError("orbit did not return to the boundary")
    xs, ys, zs, es = sol.y
    res = zs**2 + xs**2 * es**2 / (1 - xs**2 / 4) ** 2 - 1.0
    return XbarOrbit(sol.t, xs, ys, zs, es, float(sol.t_events[0][0]), float(np.abs(res).max()))


def closed_form_points(bc, t):
    """Exact hyperbolic positions for a covector at the times of :func:`trace`."""
    geo = geodesic_from_covector(bc.y, bc.eta)
    return hyperboloid_project(geo.lift(t))
