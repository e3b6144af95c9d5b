"""Reconstruction on perturbed metrics and empirical stability probes.

The hyperbolic inverse ``B = C_1 p(Delta) S_1`` serves as an approximate
left inverse of ``N_g`` and the Neumann series

    u_0 = B d,    u_{k+1} = u_k + B (d - N_g u_k)

removes the remainder ``Id - B N_g`` iteratively.
"""

import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .grid import ResolutionWarning, TestFunctionFamily, WeightedNormSpec, weighted_norm
from .inversion import invert_h
from .normal import normal_apply_convolution, normal_apply_flow
from .xray import SinogramGeometry

__all__ = [
    "ReconstructionReport",
    "ReconstructionDiverged",
    "StabilityProbeReport",
    "InjectivityReport",
    "normal_operator",
    "neumann_solve",
    "stability_ratio",
    "stability_probe",
    "injectivity_probe",
]


@dataclass
class ReconstructionReport:
    residuals: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    wall_time: float = 0.0
    converged: bool = False

    def mean_ratio(self, steps=None):
        """Geometric-mean residual contraction over the first ``steps`` iterations.

        Per-step ratios approach 1 once the residual reaches the floor set by
        the mismatch between the flow and convolution realizations of ``N_h``;
        the averaged rate is the stable statistic.
        """
        res = self.residuals if steps is None else self.residuals[:steps + 1]
        if len(res) < 2 or res[0] == 0:
            return 0.0
        return (res[-1] / res[0]) ** (1.0 / (len(res) - 1))

    def as_dict(self):
        return {**asdict(self), "mean_ratio": self.mean_ratio()}


class ReconstructionDiverged(RuntimeError):
    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


def normal_operator(g, geometry=SinogramGeometry(), n_dir=256):
    """``N_g`` as a callable on grid functions (and lists): convolution when ``psi = 0``, flow otherwise."""
    if g.is_hyperbolic:
        return normal_apply_convolution

    def apply(f):
        return normal_apply_flow(f, g, geometry, n_dir)

    return apply


def _support_mask(grid, r_support):
    return (grid.r <= r_support)[:, None].astype(float)


def neumann_solve(d, g, C_n, max_iter=8, tol=1e-4, truth=None, delta=0.0, geometry=SinogramGeometry(),
                  n_dir=256, r_support=None):
    """Solve ``N_g u = d`` by the Neumann series preconditioned with the hyperbolic inverse.

    On perturbed metrics the iterates are restricted to ``r <= r_support``
    (default ``0.9 r_max``) so the forward model applies to them.  Residuals are relative in the
    ``x^delta L^2`` norm.  With ``psi = 0`` the inverse is exact and the
    solver stops after ``u_0``.
    """
    t0 = time.perf_counter()
    grid = d.grid
    if r_support is None:
        r_support = 0.9 * grid.r_max
    # with psi = 0 the inverse is exact and u_0 is returned unmasked
    mask = 1.0 if g.is_hyperbolic else _support_mask(grid, r_support)
    N = normal_operator(g, geometry, n_dir)
    spec = WeightedNormSpec(delta, 0)

    def norm(v):
        # residuals carry a truncation tail at r_max; it is part of the measured quantity
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ResolutionWarning)
            return weighted_norm(v, g, spec)

    def B(v):
        out = invert_h(v, C_n)
        return out.with_values(out.values * mask, "reconstruction")

    report = ReconstructionReport()
    d_norm = norm(d)
    u = B(d)
    if d_norm == 0:
        report.residuals.append(0.0)
        report.converged = True
        report.wall_time = time.perf_counter() - t0
        return u, report
    t_norm = norm(truth) if truth is not None else None
    rising = 0
    for k in range(max_iter + 1):
        res = d - N(u)
        rel = norm(res) / d_norm
        report.residuals.append(rel)
        if truth is not None:
            report.errors.append(norm(u - truth) / t_norm)
        if len(report.residuals) > 1:
            ratio = report.residuals[-1] / report.residuals[-2]
            report.ratios.append(ratio)
            rising = rising + 1 if ratio >= 1 else 0
            if rising >= 2:
                report.wall_time = time.perf_counter() - t0
                raise ReconstructionDiverged("residual grew in two consecutive iterations", report)
        if rel <= tol or g.is_hyperbolic:
            report.converged = rel <= tol or g.is_hyperbolic
            break
        if k == max_iter:
            break
        u = u + B(res)
    report.wall_time = time.perf_counter() - t0
    return u, report


def stability_ratio(u, Nu, g, delta, bdf="standard"):
    """``||u||_{x^delta H_0^0} / ||N_g u||_{x^delta H_0^1}``."""
    top = weighted_norm(u, g, WeightedNormSpec(delta, 0), bdf)
    bottom = weighted_norm(Nu, g, WeightedNormSpec(delta, 1), bdf)
    return top / bottom


@dataclass
class StabilityProbeReport:
    delta: float
    ratios: list
    max_ratio: float
    refined_max_ratio: float
    drift: float


_IMAGES = {}


def _family_images(g, grid, family, count, geometry, n_dir):
    """Test functions and their ``N_g`` images, shared by the probes."""
    key = (g, grid, family.seed, family.r_support, count, geometry, n_dir)
    if key not in _IMAGES:
        us = family.samples(grid, count)
        Nus = normal_operator(g, geometry, n_dir)(list(us))
        if len(_IMAGES) >= 2:
            _IMAGES.pop(next(iter(_IMAGES)))
        _IMAGES[key] = (us, Nus)
    return _IMAGES[key]


def stability_probe(g, grid, deltas=(-0.4, 0.0, 0.4), count=20, seed=0, geometry=SinogramGeometry(), n_dir=256,
                    n=1):
    """Maximal ratio of the stability estimate over a seeded family, on ``grid`` and once refined.

    ``drift`` is the factor between the two maxima (always at least 1).
    """
    for delta in deltas:
        if not -n / 2 < delta < n / 2:
            raise ValueError("delta must lie in (-n/2, n/2)")
    family = TestFunctionFamily(seed)
    per = {}
    for gr in (grid, grid.refine()):
        us, Nus = _family_images(g, gr, family, count, geometry, n_dir)
        per[gr] = {delta: [stability_ratio(u, Nu, g, delta) for u, Nu in zip(us, Nus)] for delta in deltas}
    out = []
    for delta in deltas:
        a = per[grid][delta]
        b = per[grid.refine()][delta]
        m1, m2 = max(a), max(b)
        out.append(StabilityProbeReport(delta, a, m1, m2, max(m1, m2) / min(m1, m2)))
    return out


@dataclass
class InjectivityReport:
    ratios: list
    min_ratio: float
    refined_min_ratio: float
    drift: float


def injectivity_probe(g, grid, count=20, seed=0, geometry=SinogramGeometry(), n_dir=256):
    """Smallest ``||N_g u|| / ||u||`` (unweighted ``L^2(dV_g)``) over a seeded family, with refinement drift."""
    family = TestFunctionFamily(seed)
    spec = WeightedNormSpec(0.0, 0)
    mins = []
    first = None
    for gr in (grid, grid.refine()):
        us, Nus = _family_images(g, gr, family, count, geometry, n_dir)
        ratios = [weighted_norm(Nu, g, spec) / weighted_norm(u, g, spec) for u, Nu in zip(us, Nus)]
        first = ratios if first is None else first
        mins.append(min(ratios))
    return InjectivityReport(first, mins[0], mins[1], max(mins) / min(mins))
