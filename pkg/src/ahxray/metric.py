"""Simple asymptotically hyperbolic metrics on the disk.

The metric is ``g = exp(2 psi) h`` with ``h`` the Poincare metric and
``psi`` a finite sum of compactly supported bumps.  Outside the support
radius ``g`` equals ``h`` exactly, so near the boundary the geodesic flow is
the hyperbolic one and can be written in normal-form collar coordinates
``(x, y, zeta_bar, eta)`` with ``x = 2 (1 - r) / (1 + r)`` the geodesic
boundary defining function and ``h = (dx^2 + (1 - x^2/4)^2 dy^2) / x^2``.
"""

from dataclasses import dataclass, field

import numpy as np

from .hyperbolic import DiskPoint

__all__ = [
    "Bump",
    "ConformalPerturbation",
    "AHMetric",
    "PhaseState",
    "JacobiReport",
    "bdf_eval",
    "geodesic_bdf",
    "radius_from_geodesic_bdf",
    "metric_eval",
    "xbar_field",
    "xbar_components",
    "cosphere_residual",
    "collar_state",
    "jacobi_simplicity_check",
    "certify_simple",
    "STITCH_MARGIN",
]

STITCH_MARGIN = 0.05


@dataclass(frozen=True)
class Bump:
    """``A exp(1 - 1 / (1 - |z - z0|^2 / rho0^2))`` inside ``|z - z0| < rho0``."""

    center: tuple
    radius: float
    amplitude: float

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if not self.radius > 0:
            raise ValueError("bump radius must be positive")
        if abs(self.center[0] + 1j * self.center[1]) + self.radius >= 1.0 - STITCH_MARGIN:
            raise ValueError("bump must stay inside the disk with room for the collar")

    def _q(self, z):
        d = np.asarray(z) - (self.center[0] + 1j * self.center[1])
        return d, (d.real**2 + d.imag**2) / self.radius**2

    def value(self, z):
        _, q = self._q(z)
        out = np.zeros(np.shape(q))
        m = q < 1
        out[m] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - q[m]))
        return out

    def gradient(self, z):
        """Gradient as a complex number ``d/dx + i d/dy``."""
        d, q = self._q(z)
        out = np.zeros(np.shape(q), dtype=complex)
        m = q < 1
        s = 1.0 / (1.0 - q[m])
        v = self.amplitude * np.exp(1.0 - s)
        out[m] = -v * s * s * 2.0 * d[m] / self.radius**2
        return out

    def laplacian(self, z):
        _, q = self._q(z)
        out = np.zeros(np.shape(q))
        m = q < 1
        s = 1.0 / (1.0 - q[m])
        v = self.amplitude * np.exp(1.0 - s)
        rad2 = self.radius**2
        out[m] = v * (s**4 - 2 * s**3) * 4 * q[m] / rad2 - v * s * s * 4 / rad2
        return out


@dataclass(frozen=True)
class ConformalPerturbation:
    """Finite sum of bumps; the zero perturbation has no bumps."""

    bumps: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "bumps", tuple(self.bumps))

    @property
    def support_radius(self):
        if not self.bumps:
            return 0.0
        return max(abs(b.center[0] + 1j * b.center[1]) + b.radius for b in self.bumps)

    @property
    def amplitude_bound(self):
        return float(sum(abs(b.amplitude) for b in self.bumps))

    def psi(self, z):
        z = np.asarray(z, dtype=complex)
        return sum((b.value(z) for b in self.bumps), np.zeros(z.shape))

    def grad_psi(self, z):
        z = np.asarray(z, dtype=complex)
        return sum((b.gradient(z) for b in self.bumps), np.zeros(z.shape, dtype=complex))

    def laplacian_psi(self, z):
        z = np.asarray(z, dtype=complex)
        return sum((b.laplacian(z) for b in self.bumps), np.zeros(z.shape))

    def as_array(self):
        arr = np.array(
            [[b.center[0], b.center[1], b.radius, b.amplitude] for b in self.bumps],
            dtype=float,
        )
        return arr.reshape(-1, 4)


@dataclass(frozen=True)
class AHMetric:
    """``exp(2 psi)`` times the Poincare disk metric."""

    perturbation: ConformalPerturbation = field(default_factory=ConformalPerturbation)

    @classmethod
    def hyperbolic(cls):
        return cls(ConformalPerturbation())

    @classmethod
    def single_bump(cls, amplitude=0.05, center=(0.15, 0.1), radius=0.25):
        if amplitude == 0:
            return cls.hyperbolic()
        return cls(ConformalPerturbation((Bump(center, radius, amplitude),)))

    @property
    def is_hyperbolic(self):
        return len(self.perturbation.bumps) == 0

    @property
    def r_psi(self):
        return self.perturbation.support_radius

    @property
    def r_stitch(self):
        """Radius where interior integration hands over to the closed form."""
        return 0.0 if self.is_hyperbolic else self.r_psi + STITCH_MARGIN

    def bump_array(self):
        return self.perturbation.as_array()

    def log_conformal(self, z):
        """``phi`` with ``g = exp(2 phi) |dz|^2``."""
        z = np.asarray(z, dtype=complex)
        return np.log(2.0) - np.log1p(-np.abs(z) ** 2) + self.perturbation.psi(z)

    def density(self, z):
        """Volume density ``sqrt(det g)`` in Euclidean disk coordinates."""
        z = np.asarray(z, dtype=complex)
        return np.exp(2.0 * self.perturbation.psi(z)) * 4.0 / (1.0 - np.abs(z) ** 2) ** 2

    def gauss_curvature(self, z):
        z = np.asarray(z, dtype=complex)
        w = 1.0 - np.abs(z) ** 2
        psi = self.perturbation.psi(z)
        lap = self.perturbation.laplacian_psi(z)
        return -np.exp(-2.0 * psi) * (1.0 + w * w * lap / 4.0)


def _as_complex(p):
    return p.z if isinstance(p, DiskPoint) else np.asarray(p, dtype=complex)


def metric_eval(g, p):
    """Metric matrix and volume density at a disk point.

    Returns ``(G, density)`` with ``G`` of shape ``(..., 2, 2)``.
    """
    z = _as_complex(p)
    if np.any(np.abs(z) >= 1):
        raise ValueError("metric is only defined for r < 1")
    # in two dimensions the conformal factor is also sqrt(det G)
    dens = g.density(z)
    G = dens[..., None, None] * np.eye(2)
    return G, dens


def bdf_eval(p):
    """The boundary defining function ``x = 1 - r^2`` used for weighted norms."""
    z = _as_complex(p)
    return 1.0 - np.abs(z) ** 2


def geodesic_bdf(r):
    """Geodesic boundary defining function ``x = 2 exp(-rho) = 2 (1 - r) / (1 + r)``."""
    r = np.asarray(r, dtype=float)
    return 2.0 * (1.0 - r) / (1.0 + r)


def radius_from_geodesic_bdf(x):
    x = np.asarray(x, dtype=float)
    return (2.0 - x) / (2.0 + x)


@dataclass(frozen=True)
class PhaseState:
    """Point of the unit cosphere bundle in collar coordinates."""

    x: float
    y: float
    zbar: float
    eta: float


def _hx_inverse(x):
    return 1.0 / (1.0 - x * x / 4.0) ** 2


def cosphere_residual(s):
    """``zeta_bar^2 + x^2 |eta|^2_{h_x} - 1``."""
    return s.zbar**2 + s.x**2 * s.eta**2 * _hx_inverse(s.x) - 1.0


def xbar_field(g, s, tol=1e-8):
    """Rescaled geodesic vector field at a collar state.

    Returns ``(dx, dy, dzbar, deta)``.  The collar is the region outside
    the perturbation, ``x < 2 (1 - r_psi) / (1 + r_psi)``.
    """
    if s.x < 0 or s.x >= 2.0:
        raise ValueError("x must lie in [0, 2)")
    if not g.is_hyperbolic and s.x > geodesic_bdf(g.r_psi):
        raise ValueError("state lies outside the collar where the normal form holds")
    res = cosphere_residual(s)
    if abs(res) > tol:
        raise ValueError(f"cosphere constraint violated by {res:.3e}")
    return xbar_components(s.x, s.y, s.zbar, s.eta)


def xbar_components(x, y, zbar, eta):
    """Unchecked components of the rescaled field for the hyperbolic collar."""
    hinv = _hx_inverse(x)
    dhinv = x * (1.0 - x * x / 4.0) ** -3
    eta2 = eta * eta
    dx = zbar
    dy = x * hinv * eta
    dzbar = -(x * eta2 * hinv + 0.5 * x * x * eta2 * dhinv)
    # h_x does not depend on y, so the momentum is conserved
    deta = 0.0 * eta
    return dx, dy, dzbar, deta


def collar_state(z, p):
    """Collar coordinates of a disk point ``z`` with Euclidean covector ``p``.

    ``p`` is given as a complex number ``px + i py``.
    """
    z = np.asarray(z, dtype=complex)
    p = np.asarray(p, dtype=complex)
    r = np.abs(z)
    x = geodesic_bdf(r)
    with np.errstate(invalid="ignore", divide="ignore"):
        er = np.where(r > 0, z / np.where(r > 0, r, 1.0), 1.0)
    p_r = p.real * er.real + p.imag * er.imag
    zbar = -4.0 * x * p_r / (2.0 + x) ** 2
    eta = z.real * p.imag - z.imag * p.real
    y = np.mod(np.angle(z), 2 * np.pi)
    return x, y, zbar, eta


@dataclass
class JacobiReport:
    conjugate_points: list
    boundary_conjugate: bool
    end_growth: float
    sinh_ratio_spread: float


def _jacobi_integrate(K, dt, y0, yp0):
    """RK4 for ``Y'' = -K Y`` on a uniform sample grid; step ``2 dt``.

    ``K`` has shape ``(N,)``; ``y0`` and ``yp0`` are arrays of initial data
    at index 0.  Returns values at even indices.
    """
    n_steps = (len(K) - 1) // 2
    Y = np.empty((n_steps + 1,) + np.shape(y0))
    Y[0] = y0
    y = np.array(y0, dtype=float)
    yp = np.array(yp0, dtype=float)
    h = 2 * dt
    for i in range(n_steps):
        ka, kb, kc = K[2 * i], K[2 * i + 1], K[2 * i + 2]
        k1y, k1p = yp, -ka * y
        k2y, k2p = yp + 0.5 * h * k1p, -kb * (y + 0.5 * h * k1y)
        k3y, k3p = yp + 0.5 * h * k2p, -kb * (y + 0.5 * h * k2y)
        k4y, k4p = yp + h * k3p, -kc * (y + h * k3y)
        y = y + h / 6 * (k1y + 2 * k2y + 2 * k3y + k4y)
        yp = yp + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        Y[i + 1] = y
    return Y, yp


def jacobi_simplicity_check(g, geo, start_spacing=0.25):
    """Look for conjugate points along a traced geodesic.

    ``geo`` needs uniformly spaced unit-speed times ``geo.t`` and points
    ``geo.z``.  Normal Jacobi fields solve ``Y'' + K Y = 0``.  Fields
    vanishing at a grid of start times are checked for later zeros; the
    field decaying at the incoming end is checked for decay at the
    outgoing end (a boundary conjugate pair).
    """
    t = np.asarray(geo.t, dtype=float)
    z = np.asarray(geo.z, dtype=complex)
    dt = t[1] - t[0]
    if not np.allclose(np.diff(t), dt, rtol=1e-6, atol=1e-9):
        raise ValueError("Jacobi check needs uniformly spaced samples")
    K = g.gauss_curvature(z)
    if not np.all(np.isfinite(K)):
        raise ValueError("curvature evaluation failed along the geodesic")
    n_even = (len(t) - 1) // 2
    t_even = t[: 2 * n_even + 1 : 2]

    # principal solution from the incoming end, exp(t - t0) in the collar
    Yp, ypend = _jacobi_integrate(K, dt, 1.0, 1.0)
    span = t_even[-1] - t_even[0]
    a_coef = 0.5 * (Yp[-1] + ypend) * np.exp(-span)
    end_growth = float(a_coef)
    boundary_conjugate = bool(a_coef <= 1e-6)

    # fields vanishing at interior start times
    perturbed = np.abs(K + 1.0) > 1e-12
    if perturbed.any():
        lo = t[perturbed].min() - 3.0
        hi = t[perturbed].max()
    else:
        lo, hi = -1.0, 1.0
    starts = np.arange(max(lo, t_even[0]), min(hi, t_even[-2]) + 1e-12, start_spacing)
    idx = np.searchsorted(t_even, starts)
    idx = np.unique(np.clip(idx, 0, n_even - 1))
    conj = []
    for i0 in idx:
        Ysub, _ = _jacobi_integrate(K[2 * i0 :], dt, 0.0, 1.0)
        sign = np.sign(Ysub[1:])
        flips = np.nonzero(sign[1:] * sign[:-1] < 0)[0]
        for f in flips:
            conj.append((float(t_even[i0]), float(t_even[i0 + f + 2])))
            break

    # growth of the field with Y(0)=0, Y'(0)=1 at the closest point
    i_mid = int(np.argmin(np.abs(t_even)))
    Ymid, _ = _jacobi_integrate(K[2 * i_mid :], dt, 0.0, 1.0)
    tt = t_even[i_mid:] - t_even[i_mid]
    m = (tt >= 1.0) & (tt <= 12.0)
    if m.any():
        ratio = Ymid[m] / np.sinh(tt[m])
        spread = float((ratio.max() - ratio.min()) / abs(ratio.mean()))
    else:
        spread = float("nan")
    return JacobiReport(conj, boundary_conjugate, end_growth, spread)


_CERTIFICATES = {}


def certify_simple(g, n_geodesics=50, seed=0, dt=0.01):
    """Run the Jacobi check on geodesics crossing the perturbation.

    The result is cached per metric.  Returns ``(ok, reports)``.
    """
    key = (g, n_geodesics, seed)
    if key in _CERTIFICATES:
        return _CERTIFICATES[key]
    from .flow import BoundaryCovector, trace

    rng = np.random.default_rng(seed)
    if g.is_hyperbolic:
        eta_max = 2.0
    else:
        eta_max = np.sinh(2 * np.arctanh(min(g.r_stitch, 0.999))) * 1.1
    reports = []
    ok = True
    for k in range(n_geodesics):
        y0 = 2 * np.pi * (k + rng.uniform()) / n_geodesics
        eta = rng.uniform(-eta_max, eta_max)
        geo = trace(g, BoundaryCovector(y0, eta), dt=dt, check_simple=False)
        rep = jacobi_simplicity_check(g, geo)
        reports.append(rep)
        if rep.conjugate_points or rep.boundary_conjugate:
            ok = False
    _CERTIFICATES[key] = (ok, reports)
    return ok, reports
