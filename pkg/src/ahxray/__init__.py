"""Geodesic X-ray transform, its normal operator and the hyperbolic inversion filter on
asymptotically hyperbolic perturbations of the Poincare disk."""

from .grid import GridFunction, PolarGrid, TestFunctionFamily, WeightedNormSpec, weighted_norm
from .inversion import CalibrationResult, calibrate_Cn, invert_h
from .metric import AHMetric, Bump, ConformalPerturbation
from .normal import normal_apply_convolution, normal_apply_flow, normal_at
from .reconstruction import neumann_solve, stability_probe
from .xray import Sinogram, SinogramGeometry, backproject, forward

__all__ = [
    "AHMetric",
    "Bump",
    "ConformalPerturbation",
    "PolarGrid",
    "GridFunction",
    "TestFunctionFamily",
    "WeightedNormSpec",
    "weighted_norm",
    "SinogramGeometry",
    "Sinogram",
    "forward",
    "backproject",
    "normal_apply_flow",
    "normal_apply_convolution",
    "normal_at",
    "CalibrationResult",
    "calibrate_Cn",
    "invert_h",
    "neumann_solve",
    "stability_probe",
]
