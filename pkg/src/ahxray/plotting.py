"""PNG companions of the CSV outputs (matplotlib, non-interactive backend)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_grid", "plot_sinogram", "plot_curves"]


def plot_grid(f, path, title=None):
    """Disk image of a grid function."""
    grid = f.grid
    th = np.append(grid.theta, 2 * np.pi)
    R, T = np.meshgrid(grid.r, th, indexing="ij")
    vals = np.concatenate([f.values, f.values[:, :1]], axis=1)
    fig, ax = plt.subplots(figsize=(5, 4.5))
    lim = np.abs(vals).max() or 1.0
    pc = ax.pcolormesh(R * np.cos(T), R * np.sin(T), vals, shading="gouraud", cmap="RdBu_r", vmin=-lim, vmax=lim)
    ax.set_aspect("equal")
    ax.set_title(title or f.kind)
    fig.colorbar(pc, ax=ax)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def plot_sinogram(u, path, title="sinogram"):
    geo = u.geometry
    fig, ax = plt.subplots(figsize=(6, 4))
    pc = ax.pcolormesh(geo.s, geo.y, u.values, shading="auto", cmap="viridis")
    ax.set_xlabel("asinh(eta)")
    ax.set_ylabel("y")
    ax.set_title(title)
    fig.colorbar(pc, ax=ax)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def plot_curves(x, curves, path, xlabel, ylabel, logx=False, logy=False, title=None):
    """Line plot of ``{label: values}`` against ``x``."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for label, y in curves.items():
        ax.plot(x, y, marker="o" if len(x) <= 20 else None, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend()
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
