"""Command-line front end: ``csitplot <kind> <csv> --out <path>``."""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from .csvio import EmptyDataError, IncompleteGridError, SchemaError
from .figures import FigureSpec, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csitplot",
        description="Render simulator result CSVs into publication-style figures.",
    )
    parser.add_argument(
        "kind",
        choices=("curve", "heatmap"),
        help="curve: sweep/latency line plots; heatmap: coverage-map panels",
    )
    parser.add_argument("csv", type=Path, help="input result CSV")
    parser.add_argument("--out", type=Path, required=True, help="output PNG path")
    parser.add_argument(
        "--config",
        type=Path,
        default=None,
        help="resolved-config JSON whose beacon positions are overlaid (heatmap only)",
    )
    parser.add_argument("--dpi", type=int, default=150, help="output resolution (default 150)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.config is not None and args.kind != "heatmap":
        print("error: --config applies to heatmap figures only", file=sys.stderr)
        return 2
    try:
        spec = FigureSpec(
            input_csvs=(args.csv,),
            kind=args.kind,
            out_path=args.out,
            beacon_config=args.config,
            dpi=args.dpi,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            render(spec)
        for warning in caught:
            print(f"warning: {warning.message}", file=sys.stderr)
    except (SchemaError, EmptyDataError, IncompleteGridError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
