"""Command-line entry points: plot_timeseries and plot_field."""

from __future__ import annotations

import argparse
import sys

from .readers import SchemaError
from .render import PlotSpec, render_field_heatmap, render_timeseries


def main_timeseries(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plot_timeseries",
                                     description="log-scale time-series figure from mhdlab CSVs")
    parser.add_argument("csv", nargs="+", help="one or more time-series CSV files")
    parser.add_argument("-o", "--out", required=True, help="output image path")
    parser.add_argument("--linear", action="store_true", help="linear instead of log y-axis")
    args = parser.parse_args(argv)
    try:
        render_timeseries(PlotSpec(inputs=args.csv, output=args.out, logy=not args.linear))
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main_field(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plot_field",
                                     description="physical-space heatmap from a binary checkpoint")
    parser.add_argument("checkpoint")
    parser.add_argument("--field", default="u")
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        render_field_heatmap(
            PlotSpec(inputs=[args.checkpoint], output=args.out, kind="field-heatmap",
                     field=args.field)
        )
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main_timeseries())
