"""Command-line driver.

Every command reads one JSON configuration (defaults embedded), writes
its outputs to ``--out`` and a ``manifest.json`` beside them.  Profiles
and curves go to CSV files with a header row plus a PNG rendering.
"""

import argparse
import csv
import json
import os
import platform
import sys
import time
from importlib import metadata

import numpy as np

from .config import ConfigError, build_geometry, build_grid, build_metric, config_hash, load_config

COMMANDS = ("forward", "backproject", "normal", "invert", "reconstruct", "calibrate", "verify", "indexsets")


def _versions():
    out = {"python": platform.python_version()}
    for pkg in ("artifact", "numpy", "scipy", "numba", "matplotlib"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _radial_profile(f):
    """Angular mean against geodesic radius."""
    rho = 2 * np.arctanh(f.grid.r)
    return rho, f.values.mean(axis=1)


def _profile_outputs(out, name, fns):
    from .plotting import plot_curves

    rho = None
    cols = {}
    for label, f in fns.items():
        rho, prof = _radial_profile(f)
        cols[label] = prof
    _write_csv(os.path.join(out, f"{name}_profile.csv"), ["rho", *cols], zip(rho, *cols.values()))
    plot_curves(rho, cols, os.path.join(out, f"{name}_profile.png"), "geodesic radius rho", "angular mean")


def _phantom(cfg, grid):
    from .grid import GridFunction, TestFunctionFamily

    ph = cfg["phantom"]
    if ph["kind"] == "zero":
        return GridFunction.zeros(grid, "phantom")
    f = TestFunctionFamily(cfg["seed"], ph["r_support"]).sample(grid, ph["index"])
    return f.with_values(f.values, "phantom")


def _input(cfg, args, reader):
    path = args.input or cfg["input"]
    if path is None:
        return None
    if not os.path.exists(path):
        raise FileNotFoundError(f"input file {path} does not exist")
    return reader(path)


def _calibration(cfg, grid):
    from .inversion import calibrate_Cn, load_calibration
    from .grid import TestFunctionFamily

    path = cfg["inversion"]["calibration"]
    if path is not None:
        cal = load_calibration(path)
        if (cal.n_r, cal.n_theta, cal.r_max) != (grid.n_r, grid.n_theta, grid.r_max):
            raise ConfigError("inversion.calibration: calibration grid differs from the run grid")
        return cal
    fam = TestFunctionFamily(cfg["seed"], cfg["phantom"]["r_support"])
    return calibrate_Cn(fam.samples(grid, cfg["inversion"]["n_functions"]))


def cmd_forward(cfg, args, out):
    from .grid import write_grid
    from .plotting import plot_grid, plot_sinogram
    from .xray import forward, write_sinogram

    grid = build_grid(cfg)
    f = _phantom(cfg, grid)
    g = build_metric(cfg)
    u = forward(f, g, build_geometry(cfg), cfg["flow"]["dt"], cfg["flow"]["tol"])
    write_grid(os.path.join(out, "phantom.grid"), f)
    write_sinogram(os.path.join(out, "sinogram.sino"), u)
    geo = u.geometry
    _write_csv(os.path.join(out, "sinogram_profile.csv"), ["eta", "mean_over_y"], zip(geo.eta, u.values.mean(axis=0)))
    plot_sinogram(u, os.path.join(out, "sinogram.png"))
    plot_grid(f, os.path.join(out, "phantom.png"))
    return {"files": ["phantom.grid", "sinogram.sino", "sinogram_profile.csv"]}


def cmd_backproject(cfg, args, out):
    from .grid import write_grid
    from .plotting import plot_grid
    from .xray import backproject, forward, read_sinogram

    grid = build_grid(cfg)
    g = build_metric(cfg)
    u = _input(cfg, args, read_sinogram)
    if u is None:
        u = forward(_phantom(cfg, grid), g, build_geometry(cfg), cfg["flow"]["dt"], cfg["flow"]["tol"])
    b = backproject(u, g, grid, cfg["flow"]["n_dir"])
    write_grid(os.path.join(out, "backprojection.grid"), b)
    _profile_outputs(out, "backprojection", {"backprojection": b})
    plot_grid(b, os.path.join(out, "backprojection.png"))
    return {"files": ["backprojection.grid", "backprojection_profile.csv"]}


def cmd_normal(cfg, args, out):
    from .grid import read_grid, write_grid
    from .plotting import plot_grid
    from .reconstruction import normal_operator

    grid = build_grid(cfg)
    g = build_metric(cfg)
    f = _input(cfg, args, read_grid)
    if f is None:
        f = _phantom(cfg, grid)
    Nf = normal_operator(g, build_geometry(cfg), cfg["flow"]["n_dir"])(f)
    write_grid(os.path.join(out, "normal.grid"), Nf)
    _profile_outputs(out, "normal", {"f": f, "N_g f": Nf})
    plot_grid(Nf, os.path.join(out, "normal.png"))
    return {"files": ["normal.grid", "normal_profile.csv"], "metric": "hyperbolic" if g.is_hyperbolic else "perturbed"}


def cmd_invert(cfg, args, out):
    from .grid import read_grid, write_grid
    from .inversion import invert_h
    from .normal import normal_apply_convolution
    from .plotting import plot_grid

    grid = build_grid(cfg)
    d = _input(cfg, args, read_grid)
    f = None
    if d is None:
        f = _phantom(cfg, grid)
        d = normal_apply_convolution(f)
    cal = _calibration(cfg, d.grid)
    v = invert_h(d, cal)
    write_grid(os.path.join(out, "inverse.grid"), v)
    cols = {"data": d, "inverse": v} if f is None else {"phantom": f, "inverse": v}
    _profile_outputs(out, "inverse", cols)
    plot_grid(v, os.path.join(out, "inverse.png"))
    return {"files": ["inverse.grid", "inverse_profile.csv"], "C_n": cal.C_n}


def cmd_reconstruct(cfg, args, out):
    from .grid import read_grid, write_grid
    from .plotting import plot_curves, plot_grid
    from .reconstruction import ReconstructionDiverged, neumann_solve, normal_operator

    grid = build_grid(cfg)
    g = build_metric(cfg)
    geo = build_geometry(cfg)
    n_dir = cfg["flow"]["n_dir"]
    d = _input(cfg, args, read_grid)
    truth = None
    if d is None:
        truth = _phantom(cfg, grid)
        d = normal_operator(g, geo, n_dir)(truth)
    cal = _calibration(cfg, d.grid)
    rc = cfg["reconstruction"]
    diverged = False
    try:
        u, rep = neumann_solve(d, g, cal, rc["max_iter"], rc["tol"], truth, rc["delta"], geo, n_dir)
        write_grid(os.path.join(out, "reconstruction.grid"), u)
        plot_grid(u, os.path.join(out, "reconstruction.png"))
    except ReconstructionDiverged as exc:
        rep = exc.report
        diverged = True
    with open(os.path.join(out, "reconstruction_report.json"), "w") as fh:
        json.dump(rep.as_dict() | {"diverged": diverged}, fh, indent=2)
    k = np.arange(len(rep.residuals))
    rows = [(i, rep.residuals[i], rep.errors[i] if rep.errors else "") for i in k]
    _write_csv(os.path.join(out, "residuals.csv"), ["iteration", "relative_residual", "relative_error"], rows)
    curves = {"residual": rep.residuals} | ({"error": rep.errors} if rep.errors else {})
    plot_curves(k, curves, os.path.join(out, "residuals.png"), "iteration", "relative value", logy=True)
    if diverged:
        raise RuntimeError("Neumann iteration diverged; see reconstruction_report.json")
    return {"files": ["reconstruction.grid", "reconstruction_report.json", "residuals.csv"]}


def cmd_calibrate(cfg, args, out):
    from .inversion import C1_REFERENCE, save_calibration

    grid = build_grid(cfg)
    cal = _calibration(cfg | {"inversion": cfg["inversion"] | {"calibration": None}}, grid)
    save_calibration(os.path.join(out, "calibration.json"), cal)
    print(f"C_1 = {cal.C_n:.8f} (1/(8 pi^2) = {C1_REFERENCE:.8f}), spread {cal.spread:.2e}")
    return {"files": ["calibration.json"], "C_n": cal.C_n, "accepted": cal.accepted}


def cmd_verify(cfg, args, out):
    from .acceptance import SUITES, run_suite

    names = list(SUITES) if args.target in (None, "all") else [args.target]
    results = []
    for n in names:
        res = run_suite(n, cfg)
        print(res.line(), flush=True)
        results.append(res)
    report = [{"name": r.name, "passed": r.passed, "summary": r.summary, "runtime": r.runtime,
               "metrics": r.metrics} for r in results]
    with open(os.path.join(out, "verify_report.json"), "w") as fh:
        json.dump(report, fh, indent=2, default=_jsonable)
    _write_csv(os.path.join(out, "verify_summary.csv"), ["suite", "passed", "runtime_s"],
               [(r.name, r.passed, r.runtime) for r in results])
    passed = all(r.passed for r in results)
    return {"files": ["verify_report.json", "verify_summary.csv"], "passed": passed}


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    return str(o)


def cmd_indexsets(cfg, args, out):
    from .indexsets import evaluate, render

    expr = args.target or "compose(B,Ng,n=1)"
    text = render(evaluate(expr))
    print(text)
    with open(os.path.join(out, "indexsets.txt"), "w") as fh:
        fh.write(f"{expr}\n{text}\n")
    return {"files": ["indexsets.txt"], "expression": expr}


def build_parser():
    p = argparse.ArgumentParser(prog="ahxray", description="Geodesic X-ray transform on asymptotically hyperbolic disks")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("target", nargs="?", help="suite name for verify (or 'all'); expression for indexsets")
    p.add_argument("--config", help="JSON configuration (missing fields take the defaults)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--threads", type=int, help="cap on worker threads; results do not depend on it")
    p.add_argument("--seed", type=int, help="overrides the configured seed")
    p.add_argument("--input", help="input grid or sinogram file for backproject, normal, invert, reconstruct")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, {"seed": args.seed} if args.seed is not None else None)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.threads is not None:
        import numba

        numba.set_num_threads(max(1, min(args.threads, numba.config.NUMBA_NUM_THREADS)))
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    handler = globals()[f"cmd_{args.command}"]
    try:
        info = handler(cfg, args, args.out)
    except (ConfigError, FileNotFoundError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    manifest = {
        "command": args.command,
        "target": args.target,
        "config_hash": config_hash(cfg),
        "config": cfg,
        "versions": _versions(),
        "wall_time_s": time.perf_counter() - t0,
    } | info
    with open(os.path.join(args.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, default=_jsonable)
    if args.command == "verify" and not info["passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
