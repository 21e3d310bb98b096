"""Figure rendering for the simulator's result CSVs.

This package consumes only the simulator CLI's documented file formats
(result CSVs and the resolved-config JSON); it does not import the
simulator itself.
"""

from .csvio import (
    CurveSeries,
    CurveTable,
    EmptyDataError,
    HeatmapGrid,
    HeatmapTable,
    IncompleteGridError,
    SchemaError,
    load_beacon_positions,
    load_curve_table,
    load_heatmap_table,
)
from .figures import FigureSpec, plot_curves, plot_heatmaps, render

__all__ = [
    "CurveSeries",
    "CurveTable",
    "EmptyDataError",
    "FigureSpec",
    "HeatmapGrid",
    "HeatmapTable",
    "IncompleteGridError",
    "SchemaError",
    "load_beacon_positions",
    "load_curve_table",
    "load_heatmap_table",
    "plot_curves",
    "plot_heatmaps",
    "render",
]

__version__ = "0.1.0"
