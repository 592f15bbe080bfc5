"""Render pwlink CSV outputs as publication-style figures.

Four plot kinds: Q vs power, Q vs reach, received constellations, and
decision-region rasters.  Values are plotted exactly as read from the
CSV; no smoothing or rescaling is applied.  Inputs are never modified.
"""

import csv
from dataclasses import dataclass, field
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

PLOT_KINDS = ("q_vs_power", "q_vs_reach", "constellation", "regions")

_MARKERS = ("o", "s", "^", "d")


class RenderError(ValueError):
    """Input CSV is missing, malformed, or lacks required columns."""


@dataclass
class PlotSpec:
    kind: str
    input_csv: str
    output_path: str
    x_range: Optional[tuple] = None
    y_range: Optional[tuple] = None
    title: str = ""

    def __post_init__(self):
        if self.kind not in PLOT_KINDS:
            raise RenderError(f"unknown plot kind {self.kind!r}; expected one of {PLOT_KINDS}")


def _read_csv(path: str, required: tuple) -> list:
    try:
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
    except OSError as exc:
        raise RenderError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise RenderError(f"{path} contains no data rows")
    missing = [c for c in required if c not in rows[0]]
    if missing:
        raise RenderError(f"{path} is missing columns {missing}")
    return rows


def _finish(fig, ax, spec: PlotSpec):
    if spec.x_range:
        ax.set_xlim(*spec.x_range)
    if spec.y_range:
        ax.set_ylim(*spec.y_range)
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    fig.savefig(spec.output_path)
    plt.close(fig)
    return spec.output_path


def _render_sweep(spec: PlotSpec, x_column: str, x_label: str) -> str:
    series = sweep_line_data(spec.input_csv, x_column)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for marker, (det, pts) in zip(_MARKERS, series.items()):
        ax.plot(pts[:, 0], pts[:, 1], marker=marker, label=det.upper())
    ax.set_xlabel(x_label)
    ax.set_ylabel("Q-factor (dB)")
    ax.grid(True, alpha=0.4)
    ax.legend()
    return _finish(fig, ax, spec)


def _render_constellation(spec: PlotSpec) -> str:
    rows = _read_csv(spec.input_csv, ("re_x", "im_x", "re_y", "im_y"))
    fig, axes = plt.subplots(1, 2, figsize=(8.6, 4.2), sharex=True, sharey=True)
    has_labels = "label_x" in rows[0]
    for ax, pol in zip(axes, ("x", "y")):
        re = np.array([float(r[f"re_{pol}"]) for r in rows])
        im = np.array([float(r[f"im_{pol}"]) for r in rows])
        if has_labels:
            colors = np.array([int(r[f"label_{pol}"]) for r in rows])
            ax.scatter(re, im, c=colors, s=1.5, cmap="tab20", linewidths=0)
        else:
            ax.scatter(re, im, s=1.5, linewidths=0)
        ax.set_xlabel("In-phase")
        ax.set_aspect("equal")
        ax.set_title(f"Polarization {pol.upper()}")
    axes[0].set_ylabel("Quadrature")
    return _finish(fig, axes[0], spec)


def _render_regions(spec: PlotSpec) -> str:
    rows = _read_csv(spec.input_csv, ("grid_x", "grid_y", "label"))
    xs = np.array([float(r["grid_x"]) for r in rows])
    ys = np.array([float(r["grid_y"]) for r in rows])
    labels = np.array([int(r["label"]) for r in rows])
    gx = np.unique(xs)
    gy = np.unique(ys)
    if gx.size * gy.size != len(rows):
        raise RenderError("regions CSV does not form a complete rectangular grid")
    raster = np.empty((gy.size, gx.size), dtype=int)
    ix = np.searchsorted(gx, xs)
    iy = np.searchsorted(gy, ys)
    raster[iy, ix] = labels
    fig, ax = plt.subplots(figsize=(5.2, 4.6))
    mesh = ax.pcolormesh(
        gx, gy, raster, cmap="tab20", vmin=-0.5, vmax=19.5, shading="nearest"
    )
    fig.colorbar(mesh, ax=ax, label="class label", ticks=range(0, 16, 2))
    ax.set_xlabel("In-phase")
    ax.set_ylabel("Quadrature")
    ax.set_aspect("equal")
    return _finish(fig, ax, spec)


def render(spec: PlotSpec) -> str:
    """Render one figure; returns the output path."""
    if spec.kind == "q_vs_power":
        return _render_sweep(spec, "power_dbm", "Launch power (dBm)")
    if spec.kind == "q_vs_reach":
        return _render_sweep(spec, "reach_km", "Reach (km)")
    if spec.kind == "constellation":
        return _render_constellation(spec)
    return _render_regions(spec)


def sweep_line_data(path: str, x_column: str) -> dict:
    """Exact (x, q_db) series per detector as they would be plotted."""
    rows = _read_csv(path, (x_column, "q_db", "detector"))
    out = {}
    for det in sorted({r["detector"] for r in rows}):
        pts = sorted(
            ((float(r[x_column]), float(r["q_db"])) for r in rows if r["detector"] == det)
        )
        out[det] = np.array(pts)
    return out
