"""Static report figures written to image files (no display needed)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import ClusterResult  # noqa: E402
from .costmodel import CrossoverResult, DeviceSpec, RooflinePoint, attainable, ridge_point  # noqa: E402


def roofline_figure(
    names: Sequence[str], points: Sequence[RooflinePoint], aggregate: RooflinePoint, device: DeviceSpec, path: Path
) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ais = [p.ai for p in points] + [aggregate.ai]
    lo = min(min(ais) / 10, ridge_point(device) / 100)
    hi = max(max(ais) * 10, ridge_point(device) * 100)
    x = np.logspace(np.log10(lo), np.log10(hi), 200)
    ax.loglog(x, [attainable(v, device) for v in x], "k-", lw=1.5, label="roofline")
    ax.axvline(ridge_point(device), color="0.6", ls=":", lw=1)
    for name, p in zip(names, points):
        ax.loglog(p.ai, p.perf, "o", label=name)
    ax.loglog(aggregate.ai, aggregate.perf, "k*", ms=12, label="aggregate")
    ax.set_xlabel("arithmetic intensity (FLOP/byte)")
    ax.set_ylabel("performance (FLOP/s)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def clusters_figure(X: np.ndarray, result: ClusterResult, path: Path) -> Path:
    k = result.centroids.shape[0]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    colors = plt.cm.tab20(np.linspace(0, 1, max(k, 2)))
    for row, lab in zip(X, result.assignments):
        ax.plot(row, color=colors[lab], alpha=0.25, lw=0.7)
    for j, c in enumerate(result.centroids):
        if np.any(result.assignments == j):
            ax.plot(c, color=colors[j], lw=2.2)
    ax.set_xlabel("integration step")
    ax.set_ylabel("active cells")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def crossover_figure(results: dict[str, CrossoverResult], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label, r in results.items():
        (line,) = ax.loglog(r.grids, r.per_grid, "-", label=f"per-grid ({label})")
        ax.loglog(r.grids, r.fused, "--", color=line.get_color(), label=f"fused ({label})")
        if r.G_star is not None:
            ax.axvline(r.G_star, color=line.get_color(), ls=":", lw=1)
    ax.set_xlabel("number of grids")
    ax.set_ylabel("modeled time (s)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
