"""Run configuration: one JSON document with every numeric default embedded."""

import copy
import hashlib
import json

from .grid import PolarGrid
from .metric import AHMetric, Bump, ConformalPerturbation
from .xray import SinogramGeometry

__all__ = ["DEFAULT_CONFIG", "ConfigError", "load_config", "validate", "config_hash", "build_metric",
           "build_grid", "build_geometry"]

DEFAULT_CONFIG = {
    "seed": 0,
    "metric": {"bumps": [{"center": [0.15, 0.1], "radius": 0.25, "amplitude": 0.05}]},
    "grid": {"n_r": 256, "n_theta": 256, "r_max": 0.995},
    "sinogram": {"n_y": 256, "n_eta": 256, "eta_max": 200.0},
    "flow": {"dt": 0.01, "tol": 1e-10, "n_dir": 256},
    "phantom": {"kind": "family", "index": 0, "r_support": 0.6},
    "inversion": {"n_functions": 5, "calibration": None},
    "reconstruction": {"max_iter": 8, "tol": 1e-4, "delta": 0.0},
    "stability": {"deltas": [-0.4, 0.0, 0.4], "count": 20, "n_r": 128, "n_theta": 128},
    "weights": {"deltas": [-0.4, -0.25, -0.1], "etas": [20.0, 40.0, 80.0, 160.0]},
    "input": None,
}


class ConfigError(ValueError):
    pass


def _merge(base, over, path=""):
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = f"{path}.{k}" if path else k
        if k not in base:
            raise ConfigError(f"{where}: unknown field")
        if isinstance(base[k], dict) and isinstance(v, dict):
            out[k] = _merge(base[k], v, where)
        else:
            out[k] = v
    return out


def _positive_int(cfg, path):
    node = cfg
    for part in path.split("."):
        node = node[part]
    if not isinstance(node, int) or isinstance(node, bool) or node <= 0:
        raise ConfigError(f"{path}: must be a positive integer")


def validate(cfg):
    """Raise :class:`ConfigError` naming the offending field."""
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed: must be an integer")
    for p in ("grid.n_r", "grid.n_theta", "sinogram.n_y", "sinogram.n_eta", "flow.n_dir",
              "inversion.n_functions", "reconstruction.max_iter", "stability.count", "stability.n_r",
              "stability.n_theta"):
        _positive_int(cfg, p)
    if not 0 < cfg["grid"]["r_max"] < 1:
        raise ConfigError("grid.r_max: must lie in (0, 1)")
    if cfg["sinogram"]["eta_max"] <= 0:
        raise ConfigError("sinogram.eta_max: must be positive")
    for i, b in enumerate(cfg["metric"]["bumps"]):
        if set(b) != {"center", "radius", "amplitude"}:
            raise ConfigError(f"metric.bumps[{i}]: needs center, radius and amplitude")
        if len(b["center"]) != 2:
            raise ConfigError(f"metric.bumps[{i}].center: needs two coordinates")
    for d in cfg["stability"]["deltas"]:
        if not -0.5 < d < 0.5:
            raise ConfigError("stability.deltas: every delta must lie in (-1/2, 1/2)")
    for d in cfg["weights"]["deltas"]:
        if not -0.5 < d < 0:
            raise ConfigError("weights.deltas: every delta must lie in (-1/2, 0)")
    if cfg["phantom"]["kind"] not in ("family", "zero"):
        raise ConfigError("phantom.kind: must be 'family' or 'zero'")
    return cfg


def load_config(path=None, overrides=None):
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        with open(path) as fh:
            try:
                user = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be an object")
        cfg = _merge(cfg, user)
    if overrides:
        cfg = _merge(cfg, overrides)
    return validate(cfg)


def config_hash(cfg):
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def build_metric(cfg):
    bumps = tuple(Bump(tuple(b["center"]), b["radius"], b["amplitude"]) for b in cfg["metric"]["bumps"]
                  if b["amplitude"] != 0)
    return AHMetric(ConformalPerturbation(bumps))


def build_grid(cfg, section="grid"):
    s = cfg[section]
    return PolarGrid(s["n_r"], s["n_theta"], cfg["grid"]["r_max"])


def build_geometry(cfg):
    s = cfg["sinogram"]
    return SinogramGeometry(s["n_y"], s["n_eta"], s["eta_max"])
