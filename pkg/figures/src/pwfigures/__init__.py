"""Figure rendering for pwlink experiment outputs."""

from .render import PLOT_KINDS, PlotSpec, RenderError, render, sweep_line_data

__version__ = "0.1.0"
