"""Exact hyperbolic geometry on the Poincare disk and the upper half-plane.

Everything here is closed form: distances, the Cayley model change,
complete geodesics parametrized by incoming boundary covectors, and the
radial convolution kernels used by the normal operator and its inverse.

Conventions
-----------
Disk points are complex numbers ``z`` with ``|z| < 1`` and metric
``4|dz|^2 / (1 - |z|^2)^2``.  Half-plane points are ``zeta = w + i u`` with
``u > 0`` and metric ``(du^2 + dw^2) / u^2``.  The Cayley map sends the
disk center to ``(u, w) = (1, 0)`` and the boundary point ``z = -1`` to the
half-plane origin.

A boundary covector ``(y0, eta)`` labels the geodesic entering the disk at
angle ``y0`` whose angular momentum ``eta = g(gamma', d/dtheta)`` is
conserved; ``eta = 0`` is a diameter.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "HalfSpacePoint",
    "DiskPoint",
    "RadialKernel",
    "HyperbolicGeodesic",
    "dist_h",
    "dist_disk",
    "dist_z",
    "cayley",
    "cayley_inverse",
    "disk_to_halfplane",
    "halfplane_to_disk",
    "geodesic_from_covector",
    "kernel_R",
    "kernel_Sn",
    "kernel_PDSn",
    "radial_kernel",
    "radial_laplacian_apply",
    "hyperboloid_lift",
    "hyperboloid_project",
]


@dataclass(frozen=True)
class HalfSpacePoint:
    """Point of the upper half-plane model, ``u > 0`` (fields may be arrays)."""

    u: object
    w: object

    def __post_init__(self):
        if not np.all(np.asarray(self.u) > 0):
            raise ValueError("half-space points need u > 0")

    @property
    def zeta(self):
        return np.asarray(self.w) + 1j * np.asarray(self.u)


@dataclass(frozen=True)
class DiskPoint:
    """Point of the Poincare disk in polar form (fields may be arrays)."""

    r: object
    theta: object

    def __post_init__(self):
        r = np.asarray(self.r)
        if np.any(r < 0) or np.any(r >= 1):
            raise ValueError("disk points need 0 <= r < 1")

    @property
    def z(self):
        return np.asarray(self.r) * np.exp(1j * np.asarray(self.theta))

    @classmethod
    def from_complex(cls, z):
        z = np.asarray(z)
        return cls(np.abs(z), np.mod(np.angle(z), 2 * np.pi))


def dist_h(a, b):
    """Hyperbolic distance between two half-space points.

    Uses ``cosh(rho) - 1 = 2 sinh^2(rho/2)`` so small distances keep full
    relative accuracy.
    """
    du = np.asarray(a.u) - np.asarray(b.u)
    dw = np.asarray(a.w) - np.asarray(b.w)
    num = dw * dw + du * du
    return 2.0 * np.arcsinh(np.sqrt(num / (4.0 * np.asarray(a.u) * np.asarray(b.u))))


def dist_z(z1, z2):
    """Hyperbolic distance between complex disk coordinates."""
    z1 = np.asarray(z1)
    z2 = np.asarray(z2)
    den = np.sqrt((1.0 - np.abs(z1) ** 2) * (1.0 - np.abs(z2) ** 2))
    return 2.0 * np.arcsinh(np.abs(z1 - z2) / den)


def dist_disk(a, b):
    """Hyperbolic distance between two :class:`DiskPoint` values."""
    return dist_z(a.z, b.z)


def disk_to_halfplane(z):
    """Cayley map ``z -> i (1 + z) / (1 - z)`` as complex arrays."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) >= 1):
        raise ValueError("boundary or exterior points have no half-space image")
    return 1j * (1.0 + z) / (1.0 - z)


def halfplane_to_disk(zeta):
    """Inverse Cayley map ``zeta -> (zeta - i) / (zeta + i)``."""
    zeta = np.asarray(zeta, dtype=complex)
    if np.any(zeta.imag <= 0):
        raise ValueError("half-space points need u > 0")
    return (zeta - 1j) / (zeta + 1j)


def cayley(p):
    """Map a :class:`DiskPoint` to the corresponding :class:`HalfSpacePoint`."""
    zeta = disk_to_halfplane(p.z)
    return HalfSpacePoint(zeta.imag, zeta.real)


def cayley_inverse(q):
    """Map a :class:`HalfSpacePoint` back to the disk."""
    return DiskPoint.from_complex(halfplane_to_disk(q.zeta))


def hyperboloid_lift(z, v=None):
    """Lift disk points (and optional velocities) to the hyperboloid.

    ``v`` is the Euclidean velocity ``dz/dt`` of a curve through ``z``.
    Returns ``X`` with shape ``(3, ...)`` and, if ``v`` is given, the
    tangent ``dX/dt``.
    """
    z = np.asarray(z, dtype=complex)
    s = np.abs(z) ** 2
    d = 1.0 - s
    X = np.stack([(1.0 + s) / d, 2.0 * z.real / d, 2.0 * z.imag / d])
    if v is None:
        return X
    v = np.asarray(v, dtype=complex)
    zv = z.real * v.real + z.imag * v.imag
    dX0 = 4.0 * zv / d**2
    dX = 2.0 * v / d + 4.0 * z * zv / d**2
    return X, np.stack([dX0, dX.real, dX.imag])


def hyperboloid_project(X):
    """Project hyperboloid points ``(3, ...)`` to complex disk coordinates."""
    return (X[1] + 1j * X[2]) / (1.0 + X[0])


def _wrap(a):
    # tiny negative angles would otherwise round to 2 pi
    a = float(np.mod(a, 2 * np.pi))
    return 0.0 if a >= 2 * np.pi - 1e-15 else a


@dataclass(frozen=True)
class HyperbolicGeodesic:
    """Complete unit-speed geodesic of the hyperbolic disk.

    Stored on the hyperboloid as ``gamma(t) = cosh(t) P + sinh(t) V`` with
    ``P`` the point closest to the disk center (``t = 0``).
    """

    P: np.ndarray
    V: np.ndarray

    @classmethod
    def from_covector(cls, y0, eta):
        d = np.arcsinh(eta)
        beta = y0 + np.arccos(np.tanh(d))
        P = np.array([np.cosh(d), np.sinh(d) * np.cos(beta), np.sinh(d) * np.sin(beta)])
        V = np.array([0.0, -np.sin(beta), np.cos(beta)])
        return cls(P, V)

    @classmethod
    def from_point_direction(cls, z, direction):
        """Geodesic through ``z`` with Euclidean direction ``direction``.

        Returns the geodesic and the parameter ``t`` at which it passes
        through ``z``.
        """
        z = complex(z)
        e = complex(direction) / abs(direction)
        X, dX = hyperboloid_lift(z, e * (1.0 - abs(z) ** 2) / 2.0)
        ts = -np.arctanh(dX[0] / X[0])
        P = np.cosh(ts) * X + np.sinh(ts) * dX
        V = np.sinh(ts) * X + np.cosh(ts) * dX
        return cls(P, V), -ts

    @property
    def eta(self):
        return float(self.P[1] * self.V[2] - self.P[2] * self.V[1])

    @property
    def center_distance(self):
        return float(np.arccosh(max(self.P[0], 1.0)))

    @property
    def entry_angle(self):
        b = self.P - self.V
        return _wrap(np.arctan2(b[2], b[1]))

    @property
    def exit_angle(self):
        b = self.P + self.V
        return _wrap(np.arctan2(b[2], b[1]))

    def lift(self, t):
        t = np.asarray(t, dtype=float)
        return np.multiply.outer(self.P, np.cosh(t)) + np.multiply.outer(self.V, np.sinh(t))

    def point(self, t):
        """Complex disk coordinate at parameter ``t``."""
        return hyperboloid_project(self.lift(t))

    def velocity(self, t):
        """Euclidean velocity ``dz/dt`` at parameter ``t``."""
        t = np.asarray(t, dtype=float)
        X = self.lift(t)
        dX = np.multiply.outer(self.P, np.sinh(t)) + np.multiply.outer(self.V, np.cosh(t))
        den = 1.0 + X[0]
        return (dX[1] + 1j * dX[2]) / den - (X[1] + 1j * X[2]) * dX[0] / den**2

    def radius_at(self, t):
        """Hyperbolic distance from the center, ``cosh rho = cosh d cosh t``."""
        return np.arccosh(self.P[0] * np.cosh(np.asarray(t, dtype=float)))


def geodesic_from_covector(y0, eta):
    """Closed-form geodesic entering at angle ``y0`` with momentum ``eta``."""
    if not np.isfinite(eta) or not np.isfinite(y0):
        raise ValueError("boundary covector must be finite")
    return HyperbolicGeodesic.from_covector(float(y0), float(eta))


def _check_rho(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("radial kernels are evaluated at rho > 0")
    return rho


def kernel_R(n, rho):
    """Normal-operator kernel ``2 sinh(rho)^-n``."""
    rho = _check_rho(rho)
    return 2.0 / np.sinh(rho) ** n


def kernel_Sn(n, rho):
    """Inversion filter kernel: ``coth - 1`` for n = 1, ``cosh / sinh^n`` otherwise."""
    rho = _check_rho(rho)
    if n == 1:
        # coth(r) - 1 = 2 / (exp(2r) - 1), without cancellation
        return 2.0 / np.expm1(2.0 * rho)
    return np.cosh(rho) / np.sinh(rho) ** n


def kernel_PDSn(n, rho):
    """Closed form of ``p(Delta)`` applied to the filter kernel, ``-n cosh / sinh^(n+2)``."""
    rho = _check_rho(rho)
    return -n * np.cosh(rho) / np.sinh(rho) ** (n + 2)


@dataclass(frozen=True)
class RadialKernel:
    """A radial kernel together with its small- and large-distance orders."""

    kernel_id: str
    n: int
    singularity_order: float
    decay_rate: float

    def __call__(self, rho):
        return _KERNELS[self.kernel_id](self.n, rho)


_KERNELS = {"R": kernel_R, "S_n": kernel_Sn, "PDS_n": kernel_PDSn}


def radial_kernel(kernel_id, n):
    """Build a :class:`RadialKernel` with its asymptotic orders filled in."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    if kernel_id == "R":
        return RadialKernel("R", n, float(n), float(n))
    if kernel_id == "S_n":
        if n == 1:
            return RadialKernel("S_n", 1, 1.0, 2.0)
        return RadialKernel("S_n", n, float(n), float(n - 1))
    if kernel_id == "PDS_n":
        return RadialKernel("PDS_n", n, float(n + 2), float(n + 1))
    raise ValueError(f"unknown kernel {kernel_id!r}")


def radial_laplacian_apply(samples, rho, n, even=False):
    """Apply ``d^2/drho^2 + n coth(rho) d/drho`` to a uniformly sampled profile.

    Second-order central differences inside, second-order one-sided
    differences at the ends.  With ``even=True`` the profile starts at
    ``rho = 0`` and is extended evenly, so the value there is
    ``(n + 1) u''(0)``.
    """
    u = np.asarray(samples, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if u.shape != rho.shape or u.ndim != 1:
        raise ValueError("samples and rho must be matching 1D arrays")
    if u.size < 5:
        raise ValueError("need at least 5 samples")
    h = rho[1] - rho[0]
    if not np.allclose(np.diff(rho), h, rtol=1e-9, atol=0):
        raise ValueError("rho must be uniformly spaced")
    d1 = np.empty_like(u)
    d2 = np.empty_like(u)
    d1[1:-1] = (u[2:] - u[:-2]) / (2 * h)
    d2[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2
    d1[-1] = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h)
    d2[-1] = (2 * u[-1] - 5 * u[-2] + 4 * u[-3] - u[-4]) / h**2
    if even:
        if rho[0] != 0.0:
            raise ValueError("even extension requires rho[0] == 0")
        d2[0] = 2 * (u[1] - u[0]) / h**2
        out = d2 + n * d1 / np.tanh(np.where(rho > 0, rho, 1.0))
        out[0] = (n + 1) * d2[0]
        return out
    if rho[0] <= 0:
        raise ValueError("profile must stay away from rho = 0 unless even=True")
    d1[0] = (-3 * u[0] + 4 * u[1] - u[2]) / (2 * h)
    d2[0] = (2 * u[0] - 5 * u[1] + 4 * u[2] - u[3]) / h**2
    return d2 + n * d1 / np.tanh(rho)
