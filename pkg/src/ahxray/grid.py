"""Polar grids on the disk, grid functions, quadrature and weighted norms.

The grid is cell centred in radius, ``r_i = (i + 1/2) r_max / n_r``, and
uniform in angle, ``theta_j = 2 pi j / n_theta``, so the origin is never a
node and radial stencils continue across it through the row at the
opposite angle.  Values are stored as ``(n_r, n_theta)`` arrays.
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .hyperbolic import dist_z

__all__ = [
    "PolarGrid",
    "GridFunction",
    "WeightedNormSpec",
    "TestFunctionFamily",
    "ResolutionWarning",
    "integrate_disk",
    "inner",
    "zero_derivatives",
    "weighted_norm",
    "fiber_quadrature",
    "bdf_values",
    "hyperbolic_bump",
    "write_grid",
    "read_grid",
]


class ResolutionWarning(UserWarning):
    """Emitted when a grid function looks under-resolved or badly weighted."""


@dataclass(frozen=True)
class PolarGrid:
    n_r: int = 256
    n_theta: int = 256
    r_max: float = 0.995

    def __post_init__(self):
        if self.n_theta % 2:
            raise ValueError("n_theta must be even")
        if self.n_r < 8 or self.n_theta < 8:
            raise ValueError("grid needs at least 8 nodes per direction")
        if not 0 < self.r_max < 1:
            raise ValueError("r_max must lie in (0, 1)")

    @property
    def dr(self):
        return self.r_max / self.n_r

    @property
    def dtheta(self):
        return 2 * np.pi / self.n_theta

    @property
    def r(self):
        return (np.arange(self.n_r) + 0.5) * self.dr

    @property
    def theta(self):
        return np.arange(self.n_theta) * self.dtheta

    @property
    def shape(self):
        return (self.n_r, self.n_theta)

    @property
    def z(self):
        return self.r[:, None] * np.exp(1j * self.theta[None, :])

    def points(self):
        """Grid nodes as an ``(n_r * n_theta, 2)`` array, row-major."""
        z = self.z.ravel()
        return np.ascontiguousarray(np.stack([z.real, z.imag], axis=1))

    def area_weights(self):
        """Euclidean cell areas: midpoint rule in r, trapezoid in theta."""
        return np.repeat((self.r * self.dr * self.dtheta)[:, None], self.n_theta, axis=1)

    def refine(self, factor=2):
        return PolarGrid(self.n_r * factor, self.n_theta * factor, self.r_max)

    def header(self, kind):
        return {"n_r": self.n_r, "n_theta": self.n_theta, "r_max": self.r_max, "kind": kind}


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Immutable samples of a scalar field on a :class:`PolarGrid`."""

    grid: PolarGrid
    values: np.ndarray
    kind: str = "function"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values have shape {v.shape}, grid expects {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid, kind="function"):
        return cls(grid, np.zeros(grid.shape), kind)

    @classmethod
    def from_callable(cls, grid, fn, kind="function"):
        """Sample ``fn(z)`` (``z`` complex array) on the grid nodes."""
        return cls(grid, np.broadcast_to(fn(grid.z), grid.shape), kind)

    def with_values(self, values, kind=None):
        return GridFunction(self.grid, values, self.kind if kind is None else kind)

    def _check(self, other):
        if other.grid != self.grid:
            raise ValueError("grid mismatch")

    def __add__(self, other):
        self._check(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c):
        return self.with_values(self.values * float(c))

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self.with_values(self.values / float(c))

    def __neg__(self):
        return self.with_values(-self.values)

    def rotate(self, k):
        """Rotation about the center by ``k`` angular cells."""
        return self.with_values(np.roll(self.values, k, axis=1))

    def interpolate(self, z):
        """Bilinear interpolation at complex points (zero beyond ``r_max``)."""
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        out = np.array([_kernels.bilinear_polar(self.values, self.grid.r_max, p.real, p.imag) for p in flat])
        return out.reshape(z.shape)

    def support_radius(self, rel=0.0):
        """Largest node radius where ``|f| > rel * max|f|``."""
        a = np.abs(self.values)
        if not a.any():
            return 0.0
        rows = np.nonzero((a > rel * a.max()).any(axis=1))[0]
        return float(self.grid.r[rows[-1]])


@dataclass(frozen=True)
class WeightedNormSpec:
    delta: float = 0.0
    k: int = 0

    def __post_init__(self):
        if self.k not in (0, 1):
            raise ValueError("only k in {0, 1} is implemented")
        if not np.isfinite(self.delta):
            raise ValueError("delta must be finite")


def bdf_values(grid, bdf="standard"):
    """Boundary defining function on the nodes: ``1 - r^2`` or ``2(1 - r)/(1 + r)``."""
    r = grid.r
    if bdf == "standard":
        x = 1.0 - r * r
    elif bdf == "geodesic":
        x = 2.0 * (1.0 - r) / (1.0 + r)
    else:
        raise ValueError(f"unknown bdf {bdf!r}")
    return np.repeat(x[:, None], grid.n_theta, axis=1)


def _density(grid, g):
    if g is None or g.is_hyperbolic:
        r = grid.r
        return np.repeat((4.0 / (1.0 - r * r) ** 2)[:, None], grid.n_theta, axis=1)
    return g.density(grid.z)


def integrate_disk(f, g=None):
    """``int f dV_g`` by midpoint-in-r, trapezoid-in-theta quadrature."""
    return float(np.sum(f.values * _density(f.grid, g) * f.grid.area_weights()))


def inner(f, h, g=None):
    """``<f, h>_{L^2(dV_g)}``."""
    f._check(h)
    return integrate_disk(f.with_values(f.values * h.values), g)


def _d_theta(v, dtheta):
    n = v.shape[1]
    c = np.fft.rfft(v, axis=1)
    m = np.arange(c.shape[1])
    c = c * (1j * m)
    if n % 2 == 0:
        c[:, -1] = 0.0
    return np.fft.irfft(c, n=n, axis=1) / (dtheta * n / (2 * np.pi))


def _d_r(v, dr):
    """Fourth-order radial derivative with ghost rows across the origin."""
    n_r, n_t = v.shape
    half = n_t // 2
    ghosts = np.roll(v[:2][::-1], half, axis=1)
    e = np.concatenate([ghosts, v], axis=0)
    d = np.empty_like(v)
    # interior centred stencil for rows 0..n_r-3
    d[: n_r - 2] = (-e[4:] + 8 * e[3:-1] - 8 * e[1:-3] + e[:-4]) / (12 * dr)
    i = n_r - 2
    d[i] = (3 * v[i + 1] + 10 * v[i] - 18 * v[i - 1] + 6 * v[i - 2] - v[i - 3]) / (12 * dr)
    i = n_r - 1
    d[i] = (25 * v[i] - 48 * v[i - 1] + 36 * v[i - 2] - 16 * v[i - 3] + 3 * v[i - 4]) / (12 * dr)
    return d


def _roughness(v):
    c = np.abs(np.fft.rfft(v, axis=1)) ** 2
    top = c[:, 3 * c.shape[1] // 4 :].sum()
    tot = c.sum()
    return top / tot if tot > 0 else 0.0


def zero_derivatives(f, bdf="standard"):
    """Apply the generating 0-vector fields ``x d_r`` and ``(x / r) d_theta``.

    Together they give ``x`` times the Euclidean gradient, which in the
    hyperbolic metric is a bounded multiple of the unit-length gradient.
    """
    grid = f.grid
    if _roughness(f.values) > 1e-6:
        warnings.warn("grid function has significant energy near the angular Nyquist limit",
                      ResolutionWarning, stacklevel=2)
    x = bdf_values(grid, bdf)
    vr = x * _d_r(f.values, grid.dr)
    vt = x * _d_theta(f.values, grid.dtheta) / grid.r[:, None]
    return f.with_values(vr, "zero_derivative"), f.with_values(vt, "zero_derivative")


def weighted_norm(f, g=None, spec=WeightedNormSpec(), bdf="standard"):
    """``x^delta H_0^k`` norm: ``sum_{m<=k} int |x^{-delta} V_I f|^2 dV_g``, square-rooted."""
    grid = f.grid
    x = bdf_values(grid, bdf)
    wdelta = x ** (-spec.delta)
    fields = [f.values]
    if spec.k == 1:
        fields += [d.values for d in zero_derivatives(f, bdf)]
    dens = _density(grid, g) * grid.area_weights()
    total = 0.0
    edge = 0.0
    for v in fields:
        w = (wdelta * v) ** 2 * dens
        total += w.sum()
        edge += w[-max(2, grid.n_r // 64) :].sum()
    if total > 0 and edge > 0.1 * total:
        warnings.warn("weighted integrand concentrates at r_max; the norm may be truncation dominated",
                      ResolutionWarning, stacklevel=2)
    return float(np.sqrt(total))


def fiber_quadrature(integrand, n_dir=256, offset=0.0):
    """Trapezoid rule over the unit circle of directions at a point.

    For a conformal metric the g-orthonormal angle is the Euclidean angle,
    so the rule is uniform; ``integrand`` receives the direction angles.
    The constant 1 integrates to ``2 pi``.
    """
    a = offset + 2 * np.pi * np.arange(n_dir) / n_dir
    vals = np.asarray(integrand(a), dtype=float)
    return float(vals.sum() * 2 * np.pi / n_dir)


def hyperbolic_bump(center, radius, amplitude=1.0):
    """Smooth bump of hyperbolic radius ``radius`` about the disk point ``center``."""
    c = complex(center)

    def fn(z):
        rho = dist_z(np.asarray(z, dtype=complex), c)
        q = (rho / radius) ** 2
        out = np.zeros(np.shape(q))
        m = q < 1
        out[m] = amplitude * np.exp(1.0 - 1.0 / (1.0 - q[m]))
        return out

    return fn


@dataclass(frozen=True)
class TestFunctionFamily:
    """Seeded smooth test functions vanishing beyond ``r_support``.

    Each member is a sum of one to three hyperbolic bumps, some modulated
    by a plane wave, with centers and radii drawn so the whole support
    lies within ``r_support``.
    """

    __test__ = False

    seed: int = 0
    r_support: float = 0.6
    modulated: bool = True
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def member(self, k):
        if k in self._cache:
            return self._cache[k]
        rng = np.random.default_rng([self.seed, k])
        rho_sup = 2 * np.arctanh(self.r_support)
        parts = []
        for _ in range(int(rng.integers(1, 4))):
            rad = rng.uniform(0.35, 0.6) * rho_sup
            rho_c = rng.uniform(0.0, rho_sup - rad)
            c = np.tanh(rho_c / 2) * np.exp(1j * rng.uniform(0, 2 * np.pi))
            amp = rng.uniform(0.5, 1.5) * rng.choice([-1.0, 1.0])
            wave = None
            if self.modulated and rng.uniform() < 0.4:
                wave = (rng.uniform(2, 8) * np.exp(1j * rng.uniform(0, 2 * np.pi)), rng.uniform(0, 2 * np.pi))
            parts.append((c, rad, amp, wave))
        if all(p[2] < 0 for p in parts):
            parts[0] = (parts[0][0], parts[0][1], -parts[0][2], parts[0][3])

        def fn(z, parts=tuple(parts)):
            z = np.asarray(z, dtype=complex)
            out = np.zeros(z.shape)
            for c, rad, amp, wave in parts:
                b = hyperbolic_bump(c, rad, amp)(z)
                if wave is not None:
                    kvec, ph = wave
                    b = b * np.cos((z * np.conj(kvec)).real + ph)
                out = out + b
            return out

        self._cache[k] = fn
        return fn

    def sample(self, grid, k):
        if self.r_support > 0.9 * grid.r_max:
            raise ValueError("test function support must stay within 0.9 r_max")
        return GridFunction.from_callable(grid, self.member(k), "test_function")

    def samples(self, grid, count):
        return [self.sample(grid, k) for k in range(count)]


def write_grid(path, f):
    """One JSON header line, then row-major little-endian float64 values."""
    with open(path, "wb") as fh:
        fh.write((json.dumps(f.grid.header(f.kind)) + "\n").encode("utf-8"))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_grid(path):
    with open(path, "rb") as fh:
        head = json.loads(fh.readline().decode("utf-8"))
        data = np.frombuffer(fh.read(), dtype="<f8")
    grid = PolarGrid(int(head["n_r"]), int(head["n_theta"]), float(head["r_max"]))
    if data.size != grid.n_r * grid.n_theta:
        raise ValueError("grid file payload does not match its header")
    return GridFunction(grid, data.reshape(grid.shape), head.get("kind", "function"))
