"""Static figures written next to the CSV outputs.

Everything goes through the Agg backend and is saved as SVG with the date
stamp stripped, so reruns produce stable files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update({
    "svg.hashsalt": "nfuq",
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (5.0, 3.4),
})

# monotone, perceptually uniform
HEATMAP_CMAP = "viridis"


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def line_plot(path, x, series, labels=None, xlabel="x", ylabel="", title=None, logy=False):
    fig, ax = plt.subplots()
    series = np.atleast_2d(series)
    labels = labels or [None] * len(series)
    for y, lab in zip(series, labels):
        ax.plot(x, y, lw=1.2, marker="o" if logy else None, ms=3, label=lab)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if any(lab is not None for lab in labels):
        ax.legend(frameon=False)
    _save(fig, path)


def heatmap(path, x, t, values, xlabel="x", ylabel="t", title=None, label=""):
    """Space-time map; ``values`` has shape ``(len(t), len(x))``."""
    fig, ax = plt.subplots()
    mesh = ax.pcolormesh(x, t, values, cmap=HEATMAP_CMAP, shading="nearest", rasterized=False)
    fig.colorbar(mesh, ax=ax, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    _save(fig, path)


def field_figure(path, x, times, values, name):
    """Line plot for a single output time, heatmap for several."""
    values = np.asarray(values)
    if len(times) == 1:
        line_plot(path, x, values[0], xlabel="x", ylabel=name, title=f"{name} at t = {times[0]:g}")
    else:
        heatmap(path, x, times, values, title=name, label=name)


def convergence_figure(path, rows, m):
    """Error against the largest order, one curve per spatial resolution."""
    fig, ax = plt.subplots()
    for n in sorted({r[0] for r in rows}):
        sel = [r for r in rows if r[0] == n]
        qs = [max(r[1]) for r in sel]
        errs = [max(r[2], 1e-17) for r in sel]
        ax.semilogy(qs, errs, marker="o", ms=3, lw=1.2, label=f"n = {n}")
    ax.set_xlabel("q")
    ax.set_ylabel("error")
    ax.legend(frameon=False)
    _save(fig, path)
