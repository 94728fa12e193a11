"""Figure rendering from parsed mhdlab outputs."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .readers import parse_timeseries_csv, read_checkpoint

__all__ = ["PlotSpec", "render_timeseries", "render_field_heatmap"]


@dataclass
class PlotSpec:
    inputs: list
    output: str
    kind: str = "residual-convergence"
    logy: bool = True
    field: str = "u"
    dpi: int = 110
    figsize: tuple = (6.4, 4.2)


def render_timeseries(spec: PlotSpec) -> str:
    """Overlay time series from one or more CSVs; tolerance line when present."""
    fig, ax = plt.subplots(figsize=spec.figsize)
    any_data = False
    for path in spec.inputs:
        ts = parse_timeseries_csv(path)
        t = ts.columns["time"]
        stem = Path(path).stem
        for name, vals in ts.columns.items():
            if name == "time" or not vals or not isinstance(vals[0], float):
                continue
            label = stem if len(ts.columns) == 2 else f"{stem}:{name}"
            if t and vals:
                ax.plot(t, vals, marker="o", markersize=3, label=label)
                any_data = True
        if ts.summary and ts.summary.get("tolerance"):
            try:
                tol = float(ts.summary["tolerance"])
                ax.axhline(tol, linestyle="--", linewidth=1, color="k",
                           label=f"{stem} tolerance")
            except ValueError:
                pass
    ax.set_xlabel("time")
    ax.set_ylabel("value")
    if spec.logy and any_data:
        ax.set_yscale("log")
    if any_data:
        ax.legend(fontsize=8)
    else:
        ax.annotate("no data", xy=(0.5, 0.5), xycoords="axes fraction",
                    ha="center", va="center", fontsize=14)
    fig.tight_layout()
    fig.savefig(spec.output, dpi=spec.dpi)
    plt.close(fig)
    return spec.output


def render_field_heatmap(spec: PlotSpec) -> str:
    """Physical-space heatmap of one named field from a binary checkpoint."""
    ck = read_checkpoint(spec.inputs[0])
    phys = ck.physical(spec.field)
    if ck.dim == 3:
        phys = phys[:, 0, :]  # y = 0 slice
    x = np.arange(ck.Nx) * (ck.Lx / ck.Nx)
    z = ck.z_levels
    fig, ax = plt.subplots(figsize=spec.figsize)
    mesh = ax.pcolormesh(x, z, phys.T, shading="auto", cmap="RdBu_r")
    fig.colorbar(mesh, ax=ax, label=spec.field)
    ax.set_xlabel("x")
    ax.set_ylabel("z")
    ax.set_title(f"{spec.field} at t = {ck.time:.6g}")
    fig.tight_layout()
    fig.savefig(spec.output, dpi=spec.dpi)
    plt.close(fig)
    return spec.output
