"""The normal operator ``N_g = I* I``.

Three realizations are provided:

* grid-wide by flow composition, ``backproject(forward(f))``;
* grid-wide by convolution with ``2 / sinh(rho)`` (exact hyperbolic metric);
* pointwise, by integrating ``f`` along the geodesics through a point in
  a fan of directions, which also works for points very close to the
  boundary and for analytic inputs.

It also hosts the determinant formula for the kernel, the boundary decay
fit and the boundary-dilation (model operator) probe.
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import _kernels
from .convolution import KERNEL_R, convolution_operator, geodesic_polar_integral
from .flow import TraceError
from .grid import GridFunction
from .hyperbolic import dist_z, disk_to_halfplane, halfplane_to_disk, kernel_R
from .xray import DT, TOL, SinogramGeometry, backproject, forward, _raise_status

__all__ = [
    "KernelEvaluation",
    "normal_apply_flow",
    "normal_apply_convolution",
    "normal_at",
    "two_point_distance",
    "kernel_formula_check",
    "decay_order_fit",
    "ModelProbeReport",
    "model_operator_probe",
    "halfspace_chart",
]


@dataclass(frozen=True)
class KernelEvaluation:
    z: complex
    z_tilde: complex
    rho: float
    value: float


def normal_apply_flow(f, g, geometry=SinogramGeometry(), n_dir=256):
    """``N_g f = I* I f`` on the grid of ``f`` (or of each function in a list)."""
    grid = f[0].grid if isinstance(f, (list, tuple)) else f.grid
    out = backproject(forward(f, g, geometry), g, grid, n_dir)
    if isinstance(out, list):
        return [v.with_values(v.values, "normal") for v in out]
    return out.with_values(out.values, "normal")


def normal_apply_convolution(f):
    """``N_h f = int 2 / sinh(rho) f dV_h``; accepts a grid function or a list of them."""
    grid = f[0].grid if isinstance(f, list) else f.grid
    return convolution_operator(grid, KERNEL_R)(f, "normal")


def _max_nodes(r_cut, dt, t_budget=50.0):
    return int((2 * np.log(4.0 / (1.0 - r_cut)) + t_budget) / dt) + 16


def _fan(g, z, alphas):
    """Anchors and unit velocities of the geodesics through ``z`` at angles ``alphas``
    measured from the outward radial direction."""
    z = complex(z)
    th = np.angle(z) if z != 0 else 0.0
    w = 1.0 - abs(z) ** 2
    speed = w * np.exp(-float(g.perturbation.psi(np.array([z]))[0])) / 2.0
    d = speed * np.exp(1j * (th + alphas))
    pts = np.ascontiguousarray(np.tile([z.real, z.imag], (len(alphas), 1)))
    dirs = np.ascontiguousarray(np.stack([d.real, d.imag], axis=1))
    return pts, dirs


def _line_integrals(f, g, pts, dirs, dt, r_cut, tol):
    """Full-line integrals of a grid function or an analytic ``f(z)``."""
    bumps = g.bump_array()
    if isinstance(f, GridFunction):
        res, stat = _kernels.forward_grid(np.ascontiguousarray(f.values), f.grid.r_max, pts, dirs, dt, r_cut,
                                          bumps, g.r_stitch, tol, 50.0, _max_nodes(r_cut, dt))
        _raise_status(stat)
        return res
    pos, cnt, stat = _kernels.line_nodes(pts, dirs, dt, r_cut, bumps, g.r_stitch, tol, 50.0,
                                         _max_nodes(r_cut, dt))
    _raise_status(stat)
    out = np.empty(len(pts))
    for i in range(len(pts)):
        p = pos[i, : cnt[i]]
        out[i] = dt * np.sum(f(p[:, 0] + 1j * p[:, 1]))
    return out


def normal_at(f, g, z, n_dir=256, support_radius=None, dt=DT, tol=TOL, r_cut=None):
    """``N_g f(z) = int If d mu`` at a single point ``z``.

    With ``support_radius`` set (a Euclidean radius containing both the
    support of ``f`` and the perturbation), only the directions whose
    geodesics can meet that disc are integrated, by Gauss-Legendre over the
    window; otherwise the full circle is used with the trapezoid rule.
    """
    if r_cut is None:
        r_cut = f.grid.r_max if isinstance(f, GridFunction) else 1.0 - 1e-7
    z = complex(z)
    rho_z = 2 * np.arctanh(abs(z))
    if support_radius is not None:
        rho_w = 2 * np.arctanh(support_radius)
        ratio = np.sinh(rho_w) / np.sinh(rho_z) if rho_z > 0 else np.inf
    if support_radius is not None and ratio < 1:
        half = np.arcsin(ratio)
        xg, wg = leggauss(n_dir)
        alphas = np.pi + half * xg
        pts, dirs = _fan(g, z, alphas)
        vals = _line_integrals(f, g, pts, dirs, dt, r_cut, tol)
        # each line is met once in the inward window and once reversed
        return float(2 * half * np.sum(wg * vals))
    alphas = 2 * np.pi * np.arange(n_dir) / n_dir
    pts, dirs = _fan(g, z, alphas)
    vals = _line_integrals(f, g, pts, dirs, dt, r_cut, tol)
    return float(np.sum(vals) * 2 * np.pi / n_dir)


def _shoot(g, z1, alpha, z2, t_max):
    bumps = g.bump_array()
    buf = np.empty(4)

    def rhs(_, s):
        _kernels._rhs(s, bumps, buf)
        return buf.copy()

    phi = float(g.log_conformal(np.array([z1]))[0])
    p0 = np.exp(phi) * np.exp(1j * alpha)

    def closest(_, s):
        dx = s[0] - z2.real
        dy = s[1] - z2.imag
        return dx * s[2] + dy * s[3]

    closest.terminal = True
    closest.direction = 1
    sol = solve_ivp(rhs, (0.0, t_max), [z1.real, z1.imag, p0.real, p0.imag], method="DOP853",
                    rtol=1e-12, atol=1e-13, events=closest)
    if sol.status != 1:
        raise TraceError("shooting ray did not pass the target")
    s = sol.y_events[0][0]
    # signed miss distance: cross product of the direction with the offset
    miss = (s[2] * (z2.imag - s[1]) - s[3] * (z2.real - s[0])) / np.hypot(s[2], s[3])
    return float(sol.t_events[0][0]), float(miss)


def two_point_distance(g, z1, z2, xtol=1e-13):
    """Geodesic distance by shooting over the initial direction; closed form when ``psi = 0``."""
    z1 = complex(z1)
    z2 = complex(z2)
    if g.is_hyperbolic:
        return float(dist_z(z1, z2))
    rho_h = float(dist_z(z1, z2))
    a0 = np.angle((z2 - z1) / (1 - np.conj(z1) * z2))
    t_max = 3 * rho_h + 2

    def miss(a):
        return _shoot(g, z1, a, z2, t_max)[1]

    lo, hi = a0 - 0.2, a0 + 0.2
    for _ in range(8):
        if miss(lo) * miss(hi) < 0:
            break
        lo, hi = lo - 0.2, hi + 0.2
    else:
        raise TraceError("shooting could not bracket the target direction")
    a = brentq(miss, lo, hi, xtol=xtol, rtol=1e-15)
    return _shoot(g, z1, a, z2, t_max)[0]


def kernel_formula_check(g, z, z_tilde, h=None):
    """Return ``(2 |det d_z d_z~ (rho^2 / 2)| / (rho sqrt(det g) sqrt(det g~)), 2 / sinh(rho_h))``.

    Mixed derivatives use the four-point central stencil; the reference is
    the hyperbolic kernel at the hyperbolic distance.
    """
    z = complex(z)
    zt = complex(z_tilde)
    rho = two_point_distance(g, z, zt)
    if not 0.2 <= rho <= 3.0:
        raise ValueError("kernel check is restricted to 0.2 <= rho <= 3")
    if h is None:
        h = 1e-4 if g.is_hyperbolic else 2e-3
    e = (1.0, 1j)

    def half_sq(a, b):
        return 0.5 * two_point_distance(g, a, b) ** 2

    H = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            da = h * e[i]
            db = h * e[j]
            H[i, j] = (half_sq(z + da, zt + db) - half_sq(z + da, zt - db) - half_sq(z - da, zt + db)
                       + half_sq(z - da, zt - db)) / (4 * h * h)
    dens = g.density(np.array([z, zt]))
    val = 2 * abs(np.linalg.det(H)) / (rho * dens[0] * dens[1])
    return float(val), float(kernel_R(1, float(dist_z(z, zt))))


def decay_order_fit(g, f, theta0=0.0, ks=tuple(range(6, 15)), n_dir=64):
    """Fitted exponent ``a`` in ``N_g f ~ x^a`` along the ray at angle ``theta0``.

    Sample points satisfy ``x = 1 - r^2 = 2^{-k}``; values below a noise
    floor are excluded.  Returns ``(exponent, x, values)``.
    """
    r_s = f.support_radius() if isinstance(f, GridFunction) else 0.6
    r_w = max(r_s, g.r_stitch) + 0.01
    xs = 2.0 ** -np.asarray(ks, dtype=float)
    zs = np.sqrt(1 - xs) * np.exp(1j * theta0)
    vals = np.array([normal_at(f, g, z, n_dir=n_dir, support_radius=r_w) for z in zs])
    keep = np.abs(vals) > 1e-13 * np.abs(vals).max()
    if keep.sum() < 3:
        raise ValueError("too few samples above the noise floor for a fit")
    slope = np.polyfit(np.log(xs[keep]), np.log(np.abs(vals[keep])), 1)[0]
    return float(slope), xs, vals


def halfspace_chart(p_angle):
    """Maps between the half-plane and the disk with ``0`` sent to the boundary point ``exp(i p)``."""
    rot = np.exp(1j * (p_angle + np.pi))

    def to_disk(zeta):
        return rot * halfplane_to_disk(np.asarray(zeta, dtype=complex))

    def to_half(z):
        return disk_to_halfplane(np.asarray(z, dtype=complex) / rot)

    return to_disk, to_half


def model_bump(zeta):
    """``cosh(rho(zeta, i))^{-2}`` on the half-plane."""
    zeta = np.asarray(zeta, dtype=complex)
    c = 1 + np.abs(zeta - 1j) ** 2 / (2 * zeta.imag)
    return 1.0 / c**2


DEFAULT_PROBE_POINTS = tuple(w + 1j * u for u in (0.6, 1.0, 1.6) for w in (-0.5, 0.0, 0.5))


@dataclass
class ModelProbeReport:
    radii: tuple
    discrepancy: np.ndarray
    reference: np.ndarray
    values: np.ndarray


def model_operator_probe(g, p_angle, radii=(0.4, 0.2, 0.1), points=DEFAULT_PROBE_POINTS, n_dir=128,
                         dt=0.02, fn=model_bump):
    """Compare ``N_g`` on boundary-dilated inputs with ``N_h`` on the undilated input.

    For each ``r`` the input is ``f(zeta / r)`` in the half-plane chart at
    ``p``; ``N_g`` of it is evaluated at the images of ``r zeta_k`` by
    pointwise line integrals.  The reference ``N_h f(zeta_k)`` is a
    geodesic-polar quadrature.  Returns relative discrete L2 discrepancies.
    """
    to_disk, to_half = halfspace_chart(p_angle)
    pts = np.asarray(points, dtype=complex)
    ref = np.array([
        geodesic_polar_integral(lambda z: fn(disk_to_halfplane(z)), halfplane_to_disk(zeta), lambda r: 2 + 0 * r)
        for zeta in pts
    ])
    vals = np.empty((len(radii), len(pts)))
    for a, r in enumerate(radii):
        def dilated(z, r=r):
            return fn(to_half(z) / r)

        for k, zeta in enumerate(pts):
            vals[a, k] = normal_at(dilated, g, complex(to_disk(r * zeta)), n_dir=n_dir, dt=dt)
    disc = np.sqrt(np.sum((vals - ref[None, :]) ** 2, axis=1) / np.sum(ref**2))
    return ModelProbeReport(tuple(radii), disc, ref, vals)
