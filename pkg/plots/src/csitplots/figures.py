"""Figure rendering for simulator result CSVs.

Rendering draws on a bare Agg canvas (no pyplot, no global state), with a
fixed dpi and fixed PNG metadata, so the same input file always produces
byte-identical image output.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib as mpl
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .csvio import (
    CurveTable,
    HeatmapTable,
    load_beacon_positions,
    load_curve_table,
    load_heatmap_table,
)

#: PNG metadata written instead of the library's default Software tag, so
#: images do not change when the plotting library is patch-upgraded.
_PNG_METADATA = {"Software": "csitplot"}


@dataclass(frozen=True)
class FigureSpec:
    """Declarative description of one figure.

    ``kind`` selects the renderer: ``"curve"`` for the sweep/latency line
    plots, ``"heatmap"`` for the coverage-map panel grid. Color scale
    bounds apply to heatmaps only and are shared by every panel of a
    metric row, keeping schemes visually comparable.
    """

    input_csvs: tuple[Path, ...]
    kind: str
    out_path: Path
    x_label: str | None = None
    y_label: str | None = None
    mean_scale_dbm: tuple[float, float] = (-40.0, -5.0)
    outage_scale_log10: tuple[float, float] = (-4.0, 0.0)
    beacon_config: Path | None = None
    dpi: int = 150

    def __post_init__(self):
        if self.kind not in ("curve", "heatmap"):
            raise ValueError(f"kind must be 'curve' or 'heatmap', got {self.kind!r}")
        object.__setattr__(self, "input_csvs", tuple(Path(p) for p in self.input_csvs))
        object.__setattr__(self, "out_path", Path(self.out_path))
        for name in ("mean_scale_dbm", "outage_scale_log10"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must be (low, high) with low < high, got ({lo}, {hi})")
        if int(self.dpi) != self.dpi or self.dpi < 1:
            raise ValueError(f"dpi must be a positive integer, got {self.dpi}")


def _default_spec(csv_path: Path, kind: str, out_path: Path) -> FigureSpec:
    return FigureSpec(input_csvs=(Path(csv_path),), kind=kind, out_path=Path(out_path))


def _save(fig: Figure, out_path: Path, dpi: int) -> None:
    """Write the PNG; never leave a partial file behind on failure."""
    FigureCanvasAgg(fig)
    try:
        fig.savefig(out_path, dpi=dpi, format="png", metadata=_PNG_METADATA)
    except BaseException:
        Path(out_path).unlink(missing_ok=True)
        raise


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------


def _draw_fig1(fig: Figure, table: CurveTable, spec: FigureSpec) -> None:
    ax = fig.add_subplot(1, 1, 1)
    log_ok = True
    for series in table.series:
        band = 2.0 * series.band if series.band is not None else None
        if band is not None and np.any(series.y - band <= 0):
            log_ok = False
    for series in table.series:
        (line,) = ax.plot(series.x, series.y, marker="o", label=series.label)
        if series.band is not None:
            band = 2.0 * series.band
            ax.fill_between(
                series.x,
                series.y - band,
                series.y + band,
                alpha=0.25,
                color=line.get_color(),
                linewidth=0,
            )
    if log_ok:
        ax.set_yscale("log")
    ax.set_xlabel(spec.x_label or "trained devices K")
    ax.set_ylabel(spec.y_label or "max-min average received power (mW)")
    ax.grid(True, alpha=0.3)
    ax.legend()


def _draw_fig2(fig: Figure, table: CurveTable, spec: FigureSpec) -> None:
    if table.infeasible_count:
        warnings.warn(
            f"{table.infeasible_count} infeasible blocklength point(s) rendered as gaps",
            stacklevel=3,
        )
    latency = table.series[0]
    users = table.series[1:]
    ax_lat = fig.add_subplot(1, 2, 1)
    ax_lat.plot(latency.x, latency.y, marker="o", color="tab:blue")
    if np.isfinite(latency.y).any():
        ax_lat.set_yscale("log")
    ax_lat.set_xlabel(spec.x_label or "LoS factor (dB)")
    ax_lat.set_ylabel(spec.y_label or "minimal blocklength (channel uses)")
    ax_lat.set_title("latency target")
    ax_lat.grid(True, alpha=0.3)

    ax_sinr = fig.add_subplot(1, 2, 2)
    for series in users:
        ax_sinr.plot(series.x, series.y, marker="s", label=series.label)
    ax_sinr.set_xlabel(spec.x_label or "LoS factor (dB)")
    ax_sinr.set_ylabel("balanced average SINR (dB)")
    ax_sinr.set_title("balanced SINR")
    ax_sinr.grid(True, alpha=0.3)
    ax_sinr.legend()


def plot_curves(csv_path: Path, out_path: Path, spec: FigureSpec | None = None) -> Path:
    """Render a curve CSV (either curve schema) to a PNG file.

    Lines carry +-2 standard-error bands where the schema provides a
    ``std_error`` column; infeasible blocklength markers become gaps in
    the latency curve and emit a warning. Nothing is written when the
    input is empty or malformed.
    """
    if spec is None:
        spec = _default_spec(csv_path, "curve", out_path)
    table = load_curve_table(csv_path)
    if table.kind == "fig1":
        fig = Figure(figsize=(6.4, 4.6))
        _draw_fig1(fig, table, spec)
    else:
        fig = Figure(figsize=(10.0, 4.2))
        _draw_fig2(fig, table, spec)
    fig.set_layout_engine("constrained")
    _save(fig, out_path, spec.dpi)
    return Path(out_path)


# ---------------------------------------------------------------------------
# Heatmaps
# ---------------------------------------------------------------------------


def _cell_extent(axis: np.ndarray) -> tuple[float, float]:
    step = float(axis[1] - axis[0]) if axis.size > 1 else 1.0
    return float(axis[0]) - step / 2.0, float(axis[-1]) + step / 2.0


def _draw_heatmaps(
    fig: Figure,
    table: HeatmapTable,
    spec: FigureSpec,
    beacons: list[tuple[float, float]] | None,
) -> None:
    schemes = table.order
    mean_cmap = mpl.colormaps["viridis"].copy()
    mean_cmap.set_under("black")
    outage_cmap = mpl.colormaps["magma"].copy()
    outage_cmap.set_bad("#00e5ff")  # below-resolution marker color

    axes = fig.subplots(2, len(schemes), squeeze=False)
    mean_images = []
    outage_images = []
    for col, scheme in enumerate(schemes):
        grid = table.schemes[scheme]
        extent = (*_cell_extent(grid.xs), *_cell_extent(grid.ys))
        ax = axes[0][col]
        mean_images.append(
            ax.imshow(
                grid.mean_dbm,
                origin="lower",
                extent=extent,
                vmin=spec.mean_scale_dbm[0],
                vmax=spec.mean_scale_dbm[1],
                cmap=mean_cmap,
                interpolation="nearest",
            )
        )
        ax.set_title(scheme)

        outage = np.ma.masked_where(grid.below_resolution, grid.log10_outage)
        ax = axes[1][col]
        outage_images.append(
            ax.imshow(
                outage,
                origin="lower",
                extent=extent,
                vmin=spec.outage_scale_log10[0],
                vmax=spec.outage_scale_log10[1],
                cmap=outage_cmap,
                interpolation="nearest",
            )
        )
        for row in range(2):
            ax = axes[row][col]
            ax.set_aspect("equal")
            if beacons:
                ax.plot(
                    [b[0] for b in beacons],
                    [b[1] for b in beacons],
                    linestyle="none",
                    marker="^",
                    markersize=7,
                    markerfacecolor="white",
                    markeredgecolor="black",
                )
            if row == 1:
                ax.set_xlabel(spec.x_label or "x (m)")
            else:
                ax.set_xticklabels([])
            if col == 0:
                ax.set_ylabel(spec.y_label or "y (m)")
            else:
                ax.set_yticklabels([])

    fig.colorbar(
        mean_images[0],
        ax=list(axes[0]),
        label="mean harvested power (dBm)",
        extend="min",
        fraction=0.046,
    )
    fig.colorbar(
        outage_images[0],
        ax=list(axes[1]),
        label="log10 outage probability",
        extend="min",
        fraction=0.046,
    )


def plot_heatmaps(csv_path: Path, out_path: Path, spec: FigureSpec | None = None) -> Path:
    """Render a heatmap CSV to one PNG: a (metric row) x (scheme column) panel grid.

    Top row shows mean harvested power, bottom row the log10 outage
    probability; color scales are shared across schemes within each row.
    Cells whose outage sits at the trial-count resolution floor are drawn
    in a distinct marker color; mean cells below the color scale (the
    -99 dBm never-harvested sentinel included) are drawn black. Beacon
    positions are overlaid when the spec references a resolved-config
    file. Incomplete grids are rejected, naming the missing cells.
    """
    if spec is None:
        spec = _default_spec(csv_path, "heatmap", out_path)
    table = load_heatmap_table(csv_path)
    beacons = (
        load_beacon_positions(spec.beacon_config)
        if spec.beacon_config is not None
        else None
    )
    width = 2.2 * len(table.order) + 1.6
    fig = Figure(figsize=(width, 5.2))
    _draw_heatmaps(fig, table, spec, beacons)
    _save(fig, out_path, spec.dpi)
    return Path(out_path)


def render(spec: FigureSpec) -> Path:
    """Render a figure from a complete :class:`FigureSpec`."""
    if len(spec.input_csvs) != 1:
        raise ValueError(f"expected exactly one input CSV, got {len(spec.input_csvs)}")
    if spec.kind == "curve":
        return plot_curves(spec.input_csvs[0], spec.out_path, spec)
    return plot_heatmaps(spec.input_csvs[0], spec.out_path, spec)
