"""Forward X-ray transform, its adjoint, and the boundary-measure diagnostics.

Sinograms are indexed by incoming boundary covectors ``(y, eta)``.  The
``eta`` axis is uniform in ``s = asinh(eta)``, which is dense near normal
incidence and reaches ``|eta| = eta_max`` with a few hundred samples.  The
boundary measure is ``dy d eta = cosh(s) dy ds``.
"""

import json
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import _kernels
from .flow import TraceError, line_anchors, trace
from .grid import GridFunction, WeightedNormSpec, integrate_disk, weighted_norm
from .metric import certify_simple

__all__ = [
    "SinogramGeometry",
    "Sinogram",
    "forward",
    "backproject",
    "adjoint_at",
    "boundary_inner",
    "santalo_check",
    "weight_integral",
    "weight_asymptotics",
    "restriction_norm_equivalence",
    "boundedness_probe",
    "write_sinogram",
    "read_sinogram",
    "DT",
    "TOL",
]

DT = 0.01
TOL = 1e-10
# entry covectors feed a cubic sinogram lookup; a looser tolerance is ample there
ENTRY_TOL = 1e-8


@dataclass(frozen=True)
class SinogramGeometry:
    n_y: int = 256
    n_eta: int = 256
    eta_max: float = 200.0

    def __post_init__(self):
        if self.n_y < 4 or self.n_eta < 4:
            raise ValueError("sinogram needs at least 4 samples per axis")
        if not self.eta_max > 0:
            raise ValueError("eta_max must be positive")

    @property
    def s_max(self):
        return float(np.arcsinh(self.eta_max))

    @property
    def ds(self):
        return 2 * self.s_max / (self.n_eta - 1)

    @property
    def s(self):
        return np.linspace(-self.s_max, self.s_max, self.n_eta)

    @property
    def eta(self):
        return np.sinh(self.s)

    @property
    def y(self):
        return 2 * np.pi * np.arange(self.n_y) / self.n_y

    def measure(self):
        """Quadrature weights of ``dy d eta`` (trapezoid in s, periodic in y)."""
        w = np.full(self.n_eta, self.ds)
        w[0] = w[-1] = 0.5 * self.ds
        return (2 * np.pi / self.n_y) * np.outer(np.ones(self.n_y), w * np.cosh(self.s))

    def covectors(self):
        Y, E = np.meshgrid(self.y, self.eta, indexing="ij")
        return Y.ravel(), E.ravel()


@dataclass(frozen=True, eq=False)
class Sinogram:
    geometry: SinogramGeometry
    values: np.ndarray
    kind: str = "sinogram"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.geometry.n_y, self.geometry.n_eta):
            raise ValueError("sinogram values do not match the geometry")
        if not np.all(np.isfinite(v)):
            raise ValueError("sinogram values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, geometry, fn):
        Y, E = np.meshgrid(geometry.y, geometry.eta, indexing="ij")
        return cls(geometry, np.broadcast_to(fn(Y, E), Y.shape))

    def with_values(self, values):
        return Sinogram(self.geometry, values, self.kind)

    def __add__(self, other):
        return self.with_values(self.values + other.values)

    def __mul__(self, c):
        return self.with_values(self.values * float(c))

    __rmul__ = __mul__


def boundary_inner(u, v):
    """``<u, v>_{L^2(dy d eta)}``."""
    return float(np.sum(u.values * v.values * u.geometry.measure()))


def _check_support(f):
    if np.any(f.values[f.grid.r > 0.9 * f.grid.r_max] != 0):
        raise ValueError("function must vanish for r > 0.9 r_max")


def _certified(g):
    if not g.is_hyperbolic:
        ok, _ = certify_simple(g)
        if not ok:
            raise TraceError("metric failed the simplicity certificate")


def _max_nodes(r_cut, dt, t_budget):
    return int((2 * np.log(4.0 / (1.0 - r_cut)) + t_budget) / dt) + 16


def forward(f, g, geometry=SinogramGeometry(), dt=DT, tol=TOL, t_budget=50.0):
    """Line integrals of ``f`` over every geodesic of the sinogram grid.

    Each geodesic is sampled at unit-speed times ``k dt`` and ``f`` is
    interpolated bilinearly; the sum ``dt * sum f`` is the trapezoid rule
    for ``int f dt = int f d tau / x``.  A list of grid functions on one
    grid is traced once and gives a list of sinograms.
    """
    _certified(g)
    items = f if isinstance(f, (list, tuple)) else [f]
    grid = items[0].grid
    for h in items:
        if h.grid != grid:
            raise ValueError("grid mismatch")
        _check_support(h)
        r_s = h.support_radius()
        if r_s > 0 and np.tanh(geometry.s_max / 2) <= r_s:
            raise ValueError("eta_max too small: the outermost geodesics still meet the support")
    y, eta = geometry.covectors()
    pts, dirs = line_anchors(g, y, eta)
    r_cut = grid.r_max
    res, stat = _kernels.forward_stack(
        np.ascontiguousarray(np.stack([h.values for h in items])), grid.r_max, pts, dirs, dt, r_cut,
        g.bump_array(), g.r_stitch, tol, t_budget, _max_nodes(r_cut, dt, t_budget),
    )
    _raise_status(stat)
    out = [Sinogram(geometry, v.reshape(geometry.n_y, geometry.n_eta)) for v in res]
    return out if isinstance(f, (list, tuple)) else out[0]


def _raise_status(stat):
    worst = int(stat.min()) if stat.size else 0
    if worst == _kernels.STATUS_TRAPPED:
        raise TraceError("geodesic did not leave the perturbed region: suspected trapping")
    if worst == _kernels.STATUS_UNDERFLOW:
        raise TraceError("step size underflow while integrating a geodesic")
    if worst == _kernels.STATUS_BUFFER:
        raise TraceError("geodesic sample buffer exhausted")


_ENTRY_CACHE = {}


def _entry_map(g, points, n_dir, tol, t_budget, key):
    """Entry covectors of all directions at the given points, cached for perturbed metrics."""
    full = (g, key, n_dir, tol)
    if full in _ENTRY_CACHE:
        return _ENTRY_CACHE[full]
    alphas = 2 * np.pi * np.arange(n_dir) / n_dir
    ys, ss, stat = _kernels.entry_map(points, alphas, g.bump_array(), g.r_stitch, tol, t_budget)
    _raise_status(stat)
    if key is not None:
        if len(_ENTRY_CACHE) >= 2:
            _ENTRY_CACHE.pop(next(iter(_ENTRY_CACHE)))
        _ENTRY_CACHE[full] = (ys, ss)
    return ys, ss


def _backproject_points(u, g, points, n_dir, tol, t_budget, key=None):
    geo = u.geometry
    r = np.hypot(points[:, 0], points[:, 1])
    if r.size and np.sinh(2 * np.arctanh(r.max())) > geo.eta_max * (1 + 1e-9):
        raise ValueError("points too close to the boundary: |eta| would exceed eta_max")
    alphas = 2 * np.pi * np.arange(n_dir) / n_dir
    weights = np.full(n_dir, 2 * np.pi / n_dir)
    vals = np.ascontiguousarray(u.values)
    s0 = -geo.s_max
    if g.is_hyperbolic:
        return _kernels.backproject_hyperbolic(vals, s0, geo.ds, points, alphas, weights)
    ys, ss = _entry_map(g, points, n_dir, tol, t_budget, key)
    return _kernels.backproject_map(vals, s0, geo.ds, ys, ss, weights)


def backproject(u, g, grid, n_dir=256, tol=ENTRY_TOL, t_budget=50.0):
    """``I* u`` on every grid node: fiber quadrature of the flow-constant extension."""
    _certified(g)
    if isinstance(u, (list, tuple)):
        return [backproject(v, g, grid, n_dir, tol, t_budget) for v in u]
    out = _backproject_points(u, g, grid.points(), n_dir, tol, t_budget, key=grid)
    return GridFunction(grid, out.reshape(grid.shape), "backprojection")


def adjoint_at(u, g, z, n_dir=256, tol=ENTRY_TOL, t_budget=50.0):
    """``I* u`` at individual disk points ``z`` (complex array)."""
    _certified(g)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    pts = np.ascontiguousarray(np.stack([z.real, z.imag], axis=1))
    return _backproject_points(u, g, pts, n_dir, tol, t_budget)


def santalo_check(f, g, geometry=SinogramGeometry(), dt=DT):
    """Both sides of ``int_{S*M} f d lambda = int If d lambda_boundary`` and their relative gap."""
    lhs = 2 * np.pi * integrate_disk(f, g)
    sino = forward(f, g, geometry, dt)
    edge = np.abs(sino.values[:, [0, 1, -2, -1]]).max()
    if edge > 1e-12 * max(np.abs(sino.values).max(), 1e-300):
        warnings.warn(f"sinogram tail not negligible at eta_max (|If| up to {edge:.2e})", stacklevel=2)
    rhs = float(np.sum(sino.values * geometry.measure()))
    gap = abs(lhs - rhs) / abs(lhs) if lhs != 0 else abs(rhs)
    return lhs, rhs, gap


def weight_integral(delta, g, eta, y0=0.0, dt=DT):
    """``I(x^{-2 delta})`` along the geodesic ``(y0, eta)`` with ``x = 1 - r^2``.

    The sampled part is summed with the trapezoid rule; beyond the
    truncation ``x`` decays like ``exp(-|t|)`` and the two tails are added
    in closed form.
    """
    if not delta < 0:
        raise ValueError("weight integrals need delta < 0 for integrability")
    from .flow import BoundaryCovector

    geo = trace(g, BoundaryCovector(y0, eta), dt=dt)
    x = 1.0 - np.abs(geo.z) ** 2
    a = -2.0 * delta
    w = x**a
    body = dt * (w.sum() - 0.5 * (w[0] + w[-1]))
    tails = (w[0] + w[-1]) / a
    return float(body + tails)


def weight_asymptotics(delta, g, etas=(20.0, 40.0, 80.0, 160.0), dt=DT):
    """Least-squares slope of ``log I(x^{-2 delta})`` against ``log |eta|``."""
    vals = np.array([weight_integral(delta, g, e, dt=dt) for e in etas])
    slope = np.polyfit(np.log(np.asarray(etas)), np.log(vals), 1)[0]
    return float(slope), vals


def restriction_norm_equivalence(f, delta, g, geometry=SinogramGeometry(), n_rho=48, n_theta=64, n_dir=128):
    """Return ``(interior norm, boundary norm, ratio)`` for ``If``.

    The interior norm is ``(int x^{-2 delta} I*(|If|^2) dV_g)^{1/2}``, i.e.
    ``|If|^2`` integrated over the unit cosphere bundle as a flow-constant
    function, computed by Gauss-Legendre in geodesic radius up to the grid
    edge plus a closed-form tail using the ``exp(-rho)`` decay of the
    backprojection.  The boundary norm weights ``|If|^2`` by
    ``<eta>^{-2 delta}``.
    """
    if not -0.5 < delta < 0:
        raise ValueError("delta must lie in (-1/2, 0)")
    sino = forward(f, g, geometry)
    sq = sino.with_values(sino.values**2)
    eta = geometry.eta
    bnd = float(np.sum(sq.values * (1 + eta[None, :] ** 2) ** (-delta) * geometry.measure()))
    rho_max = 2 * np.arctanh(f.grid.r_max)
    xg, wg = leggauss(n_rho)
    rho = 0.5 * rho_max * (xg + 1)
    wr = 0.5 * rho_max * wg
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    z = (np.tanh(rho / 2)[:, None] * np.exp(1j * th[None, :])).ravel()
    back = adjoint_at(sq, g, z, n_dir).reshape(n_rho, n_theta)
    x = 1.0 / np.cosh(rho / 2) ** 2
    dens = np.exp(2 * g.perturbation.psi(z)).reshape(n_rho, n_theta)
    integrand = x[:, None] ** (-2 * delta) * back * dens * np.sinh(rho)[:, None]
    inner_sq = float(np.sum(integrand * wr[:, None]) * 2 * np.pi / n_theta)
    # tail: back ~ A exp(-rho), x ~ 4 exp(-rho), sinh(rho) ~ exp(rho)/2
    z_edge = np.tanh(rho_max / 2) * np.exp(1j * th)
    A = adjoint_at(sq, g, z_edge, n_dir) * np.exp(rho_max)
    a = -2 * delta
    tail = float(np.mean(A) * 2 * np.pi * 4**a * np.exp(-a * rho_max) / (2 * a))
    interior = np.sqrt(inner_sq + tail)
    boundary = np.sqrt(bnd)
    ratio = interior / boundary if boundary > 0 else float("nan")
    return float(interior), float(boundary), float(ratio)


def boundedness_probe(g, family, grid, count=20, delta=0.25, delta_b=-0.1, geometry=SinogramGeometry()):
    """Ratios ``||If||_{<eta>^{-delta_b} L^2} / ||f||_{x^delta L^2}`` over a test family."""
    ratios = []
    eta = geometry.eta
    wb = (1 + eta[None, :] ** 2) ** (-delta_b) * geometry.measure()
    for k in range(count):
        f = family.sample(grid, k)
        sino = forward(f, g, geometry)
        top = np.sqrt(np.sum(sino.values**2 * wb))
        ratios.append(top / weighted_norm(f, g, WeightedNormSpec(delta, 0)))
    return np.array(ratios)


def write_sinogram(path, u):
    head = {"n_y": u.geometry.n_y, "eta_grid": u.geometry.eta.tolist(), "eta_max": u.geometry.eta_max,
            "kind": u.kind}
    with open(path, "wb") as fh:
        fh.write((json.dumps(head) + "\n").encode("utf-8"))
        fh.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes())


def read_sinogram(path):
    with open(path, "rb") as fh:
        head = json.loads(fh.readline().decode("utf-8"))
        data = np.frombuffer(fh.read(), dtype="<f8")
    eta = np.asarray(head["eta_grid"])
    geo = SinogramGeometry(int(head["n_y"]), len(eta), float(head.get("eta_max", eta[-1])))
    if not np.allclose(geo.eta, eta, rtol=1e-12, atol=0):
        raise ValueError("eta grid in file is not an asinh-uniform grid")
    return Sinogram(geo, data.reshape(geo.n_y, geo.n_eta), head.get("kind", "sinogram"))
