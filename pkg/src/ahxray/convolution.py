"""Radial convolutions on the hyperbolic disk, sampled on a polar grid.

An operator ``(K f)(z) = int k(rho(z, w)) f(w) dV_h(w)`` is split with a
smooth cutoff ``chi(rho / eps)``:

* far part ``k (1 - chi)``: a smooth kernel that depends on the two radii
  and the angle difference only, so each output ring is a sum over input
  rings of circular convolutions, evaluated with real FFT tables;
* near part ``k chi``: integrated in geodesic polar coordinates about the
  output node, where ``k(rho) sinh(rho)`` is bounded, with Gauss-Legendre
  in ``rho``, the midpoint rule in angle and sixth-order interpolation.

``eps`` is at least ``eps0`` and at least a few local cell sizes, so the
far kernel is resolved by the grid everywhere.
"""

from dataclasses import dataclass
from math import comb

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import leggauss

from . import _kernels
from .grid import GridFunction

__all__ = [
    "ConvolutionKernel",
    "RadialConvolution",
    "KERNEL_R",
    "KERNEL_S1",
    "cutoff",
    "convolution_operator",
    "geodesic_polar_integral",
]

CUTOFF_ORDER = 5
MAX_TABLE_BYTES = 700 * 2**20


def _smoothstep(order):
    n = order
    coef = np.zeros(2 * n + 2)
    for k in range(n + 1):
        coef[n + 1 + k] = comb(n + k, k) * comb(2 * n + 1, n - k) * (-1) ** k
    return Polynomial(coef)


_STEP = _smoothstep(CUTOFF_ORDER)


def cutoff(t, deriv=0):
    """``chi(t)``: 1 at ``t <= 0``, 0 at ``t >= 1``, ``C^5`` in between (or a derivative)."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    p = _STEP.deriv(deriv) if deriv else _STEP
    out = np.zeros_like(t)
    out[inside] = -p(t[inside]) if deriv else 1.0 - p(t[inside])
    if deriv == 0:
        out[t <= 0] = 1.0
    return out


@dataclass(frozen=True)
class ConvolutionKernel:
    """Radial kernel ``k`` with the bounded density ``k(rho) sinh(rho)``."""

    name: str
    value: object
    times_sinh: object


def _r_value(rho):
    return 2.0 / np.sinh(rho)


def _r_sinh(rho):
    return np.full_like(np.asarray(rho, dtype=float), 2.0)


def _s1_value(rho):
    return 2.0 / np.expm1(2.0 * rho)


def _s1_sinh(rho):
    return np.exp(-np.asarray(rho, dtype=float))


KERNEL_R = ConvolutionKernel("R", _r_value, _r_sinh)
KERNEL_S1 = ConvolutionKernel("S_1", _s1_value, _s1_sinh)


def _pair_rho(r1, r2, dth):
    d2 = r1 * r1 + r2 * r2 - 2 * r1 * r2 * np.cos(dth)
    d2 = np.maximum(d2, 0.0)
    return 2.0 * np.arcsinh(np.sqrt(d2 / ((1 - r1 * r1) * (1 - r2 * r2))))


_TABLES = {}


class RadialConvolution:
    """Convolution with a radial kernel on a fixed polar grid (exact hyperbolic metric)."""

    def __init__(self, grid, kernel, eps0=0.25, cells=3.0, n_rho=16, n_alpha=32, far_value=None):
        self.grid = grid
        self.kernel = kernel
        self.eps0 = float(eps0)
        self.cells = float(cells)
        self.n_rho = int(n_rho)
        self.n_alpha = int(n_alpha)
        # far_value overrides k (1 - chi) on the far side, e.g. for a regularized kernel
        self.far_value = far_value
        r = grid.r
        conf = 2.0 / (1 - r * r)
        cell = conf * np.maximum(grid.dr, r * grid.dtheta)
        self.eps = np.maximum(self.eps0, self.cells * cell)
        xg, wg = leggauss(self.n_rho)
        t = 0.5 * (xg + 1)
        self.rho_nodes = np.ascontiguousarray(self.eps[:, None] * t[None, :])
        w = 0.5 * wg[None, :] * self.eps[:, None]
        self.rho_weights = np.ascontiguousarray(
            2 * np.pi * w * kernel.times_sinh(self.rho_nodes) * cutoff(t)[None, :]
        )

    def _key(self):
        return (self.grid, self.kernel.name, self.eps0, self.cells, id(self.far_value))

    def _far_ring(self, i):
        g = self.grid
        r = g.r
        dth = g.theta
        rho = _pair_rho(r[i], r[:, None], dth[None, :])
        t = rho / self.eps[i]
        if self.far_value is not None:
            k = self.far_value(rho, self.eps[i])
        else:
            k = np.zeros_like(rho)
            m = rho > 0
            k[m] = self.kernel.value(rho[m]) * (1.0 - cutoff(t[m]))
        dv = 4.0 / (1 - r * r) ** 2 * r * g.dr * g.dtheta
        return np.fft.rfft(k * dv[:, None], axis=1).real

    def table(self):
        """Fourier tables ``T[m, i, j]`` of the far kernel, cached when small enough."""
        key = self._key()
        if key in _TABLES:
            return _TABLES[key]
        g = self.grid
        n_m = g.n_theta // 2 + 1
        tab = np.empty((n_m, g.n_r, g.n_r))
        for i in range(g.n_r):
            tab[:, i, :] = self._far_ring(i).T
        if tab.nbytes <= MAX_TABLE_BYTES:
            if len(_TABLES) >= 2:
                _TABLES.pop(next(iter(_TABLES)))
            _TABLES[key] = tab
        return tab

    def far(self, values):
        """Far part for a stack ``(n_f, n_r, n_theta)`` of inputs."""
        tab = self.table()
        F = np.fft.rfft(values, axis=2)
        Fm = np.transpose(F, (2, 1, 0))
        out_re = np.matmul(tab, Fm.real)
        out_im = np.matmul(tab, Fm.imag)
        out = np.transpose(out_re + 1j * out_im, (2, 1, 0))
        return np.fft.irfft(out, n=self.grid.n_theta, axis=2)

    def near(self, values):
        return np.stack([
            _kernels.near_convolution(np.ascontiguousarray(v), self.grid.r_max, self.rho_nodes,
                                      self.rho_weights, self.n_alpha)
            for v in values
        ])

    def apply_values(self, values):
        v = np.asarray(values, dtype=float)
        single = v.ndim == 2
        if single:
            v = v[None]
        out = self.far(v) + self.near(v)
        return out[0] if single else out

    def __call__(self, f, kind="convolution"):
        if isinstance(f, (list, tuple)):
            out = self.apply_values(np.stack([h.values for h in f]))
            return [h.with_values(o, kind) for h, o in zip(f, out)]
        if f.grid != self.grid:
            raise ValueError("grid mismatch")
        return GridFunction(self.grid, self.apply_values(f.values), kind)


_OPERATORS = {}


def convolution_operator(grid, kernel, **kw):
    key = (grid, kernel.name, tuple(sorted(kw.items())))
    if key not in _OPERATORS:
        _OPERATORS[key] = RadialConvolution(grid, kernel, **kw)
    return _OPERATORS[key]


def geodesic_polar_integral(fn, z, kernel_times_sinh, rho_max=20.0, n_rho=800, n_alpha=512, panels=32):
    """``int int k(rho) sinh(rho) fn(exp_z(rho, alpha)) d rho d alpha`` for analytic ``fn``.

    Composite Gauss-Legendre in ``rho`` and the trapezoid rule in angle;
    ``fn`` takes complex disk points.
    """
    z = complex(z)
    edges = np.linspace(0.0, rho_max, panels + 1)
    xg, wg = leggauss(max(n_rho // panels, 4))
    rho = np.concatenate([0.5 * (b - a) * (xg + 1) + a for a, b in zip(edges[:-1], edges[1:])])
    wr = np.concatenate([0.5 * (b - a) * wg for a, b in zip(edges[:-1], edges[1:])])
    al = 2 * np.pi * np.arange(n_alpha) / n_alpha
    w = np.tanh(rho / 2)[:, None] * np.exp(1j * al)[None, :]
    pts = (w + z) / (1 + np.conj(z) * w)
    vals = fn(pts)
    return float(np.sum(wr[:, None] * kernel_times_sinh(rho)[:, None] * vals) * 2 * np.pi / n_alpha)
