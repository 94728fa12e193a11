"""mhdplots: offline figures from mhdlab CSV and binary checkpoint outputs."""

from .readers import Checkpoint, SchemaError, TimeSeries, parse_timeseries_csv, read_checkpoint
from .render import PlotSpec, render_field_heatmap, render_timeseries

__version__ = "0.1.0"
