"""Readers for the simulator CLI's result CSVs.

The CSV files are the only interface between the simulator and this
package: three fixed schemas (two curve kinds and one heatmap kind), one
header line each, values in plain decimal notation. Readers validate the
header and every cell and raise errors that name the offending column or
grid cell, so a wrong or truncated file fails loudly instead of producing
a silently wrong figure.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

#: Literal marker the simulator writes when no feasible blocklength exists.
INFEASIBLE_MARKER = "infeasible"

FIG1_COLUMNS = ("scenario", "K", "maxmin_mw", "std_error")
HEATMAP_COLUMNS = ("x_m", "y_m", "scheme", "mean_harvested_dbm", "log10_outage", "trials")


class SchemaError(ValueError):
    """The file does not conform to the expected CSV schema."""


class EmptyDataError(ValueError):
    """The file has a valid header but no data rows."""


class IncompleteGridError(ValueError):
    """A heatmap scheme does not cover the full rectangular grid."""


def _read_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty (no header line)") from None
        rows = [row for row in reader if row]
    return header, rows


def _check_header(path: Path, header: list[str], expected: tuple[str, ...]) -> None:
    missing = [c for c in expected if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing column {missing[0]!r}")
    extra = [c for c in header if c not in expected]
    if extra:
        raise SchemaError(f"{path}: unexpected column {extra[0]!r}")
    if list(header) != list(expected):
        raise SchemaError(
            f"{path}: columns out of order, expected {', '.join(expected)}"
        )


def _parse_float(path: Path, row_num: int, column: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise SchemaError(
            f"{path}: row {row_num}, column {column!r}: not a number: {text!r}"
        ) from None
    if not math.isfinite(value):
        raise SchemaError(
            f"{path}: row {row_num}, column {column!r}: non-finite value {text!r}"
        )
    return value


def _parse_int(path: Path, row_num: int, column: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise SchemaError(
            f"{path}: row {row_num}, column {column!r}: not an integer: {text!r}"
        ) from None


# ---------------------------------------------------------------------------
# Curve tables (trained-device sweep and latency-vs-LoS files)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurveSeries:
    """One plotted line: x values, y values, optional +-band half-width."""

    label: str
    x: np.ndarray
    y: np.ndarray  # NaN marks a gap (infeasible point)
    band: np.ndarray | None = None


@dataclass(frozen=True)
class CurveTable:
    """Parsed curve CSV: ``kind`` is ``"fig1"`` or ``"fig2"``."""

    kind: str
    series: tuple[CurveSeries, ...]
    infeasible_count: int = 0


def _load_fig1(path: Path, rows: list[list[str]]) -> CurveTable:
    per_scenario: dict[str, list[tuple[int, float, float]]] = {}
    for i, row in enumerate(rows, start=2):
        if len(row) != len(FIG1_COLUMNS):
            raise SchemaError(f"{path}: row {i}: expected {len(FIG1_COLUMNS)} fields, got {len(row)}")
        scenario, k_text, value_text, err_text = row
        k = _parse_int(path, i, "K", k_text)
        if k < 1:
            raise SchemaError(f"{path}: row {i}, column 'K': must be >= 1, got {k}")
        value = _parse_float(path, i, "maxmin_mw", value_text)
        err = _parse_float(path, i, "std_error", err_text)
        if err < 0:
            raise SchemaError(f"{path}: row {i}, column 'std_error': must be >= 0, got {err}")
        per_scenario.setdefault(scenario, []).append((k, value, err))
    series = []
    for scenario in sorted(per_scenario):
        points = sorted(per_scenario[scenario])
        series.append(
            CurveSeries(
                label=f"scenario {scenario}",
                x=np.array([p[0] for p in points], dtype=float),
                y=np.array([p[1] for p in points], dtype=float),
                band=np.array([p[2] for p in points], dtype=float),
            )
        )
    return CurveTable(kind="fig1", series=tuple(series))


def _load_fig2(path: Path, header: list[str], rows: list[list[str]]) -> CurveTable:
    sinr_columns = [c for c in header if c.startswith("balanced_sinr_db_")]
    expected = ["kappa_db", "blocklength"] + [
        f"balanced_sinr_db_{i}" for i in range(1, len(sinr_columns) + 1)
    ]
    _check_header(path, header, tuple(expected))
    if not sinr_columns:
        raise SchemaError(f"{path}: missing column 'balanced_sinr_db_1'")
    kappas: list[float] = []
    lengths: list[float] = []
    sinrs: list[list[float]] = []
    infeasible = 0
    for i, row in enumerate(rows, start=2):
        if len(row) != len(expected):
            raise SchemaError(f"{path}: row {i}: expected {len(expected)} fields, got {len(row)}")
        kappas.append(_parse_float(path, i, "kappa_db", row[0]))
        if row[1] == INFEASIBLE_MARKER:
            lengths.append(math.nan)
            infeasible += 1
        else:
            n = _parse_int(path, i, "blocklength", row[1])
            if n < 1:
                raise SchemaError(
                    f"{path}: row {i}, column 'blocklength': must be >= 1, got {n}"
                )
            lengths.append(float(n))
        sinrs.append(
            [
                _parse_float(path, i, expected[2 + u], row[2 + u])
                for u in range(len(sinr_columns))
            ]
        )
    order = np.argsort(kappas, kind="stable")
    kappa_arr = np.array(kappas)[order]
    series = [
        CurveSeries(label="minimal blocklength", x=kappa_arr, y=np.array(lengths)[order])
    ]
    sinr_arr = np.array(sinrs)[order]
    for u in range(len(sinr_columns)):
        series.append(
            CurveSeries(label=f"user {u + 1}", x=kappa_arr, y=sinr_arr[:, u])
        )
    return CurveTable(kind="fig2", series=tuple(series), infeasible_count=infeasible)


def load_curve_table(path: Path) -> CurveTable:
    """Parse a curve CSV, auto-detecting which of the two kinds it is."""
    path = Path(path)
    header, rows = _read_rows(path)
    if "scenario" in header:
        _check_header(path, header, FIG1_COLUMNS)
        if not rows:
            raise EmptyDataError(f"{path}: no data rows")
        return _load_fig1(path, rows)
    if "kappa_db" in header:
        if not rows:
            raise EmptyDataError(f"{path}: no data rows")
        return _load_fig2(path, header, rows)
    raise SchemaError(
        f"{path}: unexpected column {header[0]!r} (not a known curve schema)"
    )


# ---------------------------------------------------------------------------
# Heatmap tables (coverage-map files)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HeatmapGrid:
    """One scheme's maps on a uniform grid.

    ``mean_dbm`` and ``log10_outage`` are indexed ``[y, x]``.
    ``below_resolution`` flags cells whose outage value sits at the
    floor ``-(log10(trials) + 1)``, i.e. no outage was observed in any
    trial and only an upper bound is known.
    """

    scheme: str
    xs: np.ndarray
    ys: np.ndarray
    mean_dbm: np.ndarray
    log10_outage: np.ndarray
    below_resolution: np.ndarray
    trials: int


@dataclass(frozen=True)
class HeatmapTable:
    schemes: dict[str, HeatmapGrid]
    order: tuple[str, ...]  # schemes in file order


def _uniform_axis(path: Path, name: str, values: np.ndarray) -> None:
    if values.size > 1:
        steps = np.diff(values)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-9):
            raise SchemaError(f"{path}: {name} coordinates are not uniformly spaced")


def load_heatmap_table(path: Path) -> HeatmapTable:
    """Parse a heatmap CSV into per-scheme grids, validating completeness."""
    path = Path(path)
    header, rows = _read_rows(path)
    _check_header(path, header, HEATMAP_COLUMNS)
    if not rows:
        raise EmptyDataError(f"{path}: no data rows")

    per_scheme: dict[str, dict[tuple[float, float], tuple[float, float]]] = {}
    trials_seen: dict[str, int] = {}
    order: list[str] = []
    for i, row in enumerate(rows, start=2):
        if len(row) != len(HEATMAP_COLUMNS):
            raise SchemaError(
                f"{path}: row {i}: expected {len(HEATMAP_COLUMNS)} fields, got {len(row)}"
            )
        x = _parse_float(path, i, "x_m", row[0])
        y = _parse_float(path, i, "y_m", row[1])
        scheme = row[2]
        mean_dbm = _parse_float(path, i, "mean_harvested_dbm", row[3])
        outage = _parse_float(path, i, "log10_outage", row[4])
        trials = _parse_int(path, i, "trials", row[5])
        if trials < 1:
            raise SchemaError(f"{path}: row {i}, column 'trials': must be >= 1, got {trials}")
        if scheme not in per_scheme:
            per_scheme[scheme] = {}
            trials_seen[scheme] = trials
            order.append(scheme)
        elif trials_seen[scheme] != trials:
            raise SchemaError(
                f"{path}: row {i}, column 'trials': scheme {scheme!r} mixes "
                f"{trials_seen[scheme]} and {trials}"
            )
        cells = per_scheme[scheme]
        if (x, y) in cells:
            raise SchemaError(f"{path}: row {i}: duplicate cell ({x:g}, {y:g}) for scheme {scheme!r}")
        cells[(x, y)] = (mean_dbm, outage)

    grids: dict[str, HeatmapGrid] = {}
    for scheme in order:
        cells = per_scheme[scheme]
        xs = np.array(sorted({x for x, _ in cells}))
        ys = np.array(sorted({y for _, y in cells}))
        _uniform_axis(path, "x_m", xs)
        _uniform_axis(path, "y_m", ys)
        missing = [
            (x, y)
            for y in ys
            for x in xs
            if (x, y) not in cells
        ]
        if missing:
            shown = ", ".join(f"({x:g}, {y:g})" for x, y in missing[:6])
            more = "" if len(missing) <= 6 else f" and {len(missing) - 6} more"
            raise IncompleteGridError(
                f"{path}: scheme {scheme!r} grid is missing {len(missing)} "
                f"cell(s): {shown}{more}"
            )
        mean = np.empty((ys.size, xs.size))
        outage = np.empty((ys.size, xs.size))
        for iy, y in enumerate(ys):
            for ix, x in enumerate(xs):
                mean[iy, ix], outage[iy, ix] = cells[(x, y)]
        trials = trials_seen[scheme]
        floor = -(math.log10(trials) + 1.0)
        grids[scheme] = HeatmapGrid(
            scheme=scheme,
            xs=xs,
            ys=ys,
            mean_dbm=mean,
            log10_outage=outage,
            below_resolution=outage <= floor + 1e-9,
            trials=trials,
        )
    return HeatmapTable(schemes=grids, order=tuple(order))


def load_beacon_positions(path: Path) -> list[tuple[float, float]]:
    """Read beacon coordinates from a resolved-config JSON file."""
    import json

    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(data, dict) or "beacon_positions_m" not in data:
        raise SchemaError(f"{path}: missing key 'beacon_positions_m'")
    positions = data["beacon_positions_m"]
    try:
        return [(float(x), float(y)) for x, y in positions]
    except (TypeError, ValueError):
        raise SchemaError(
            f"{path}: 'beacon_positions_m' must be a list of [x, y] pairs"
        ) from None
