"""Plotting companion for the simulator's CSV outputs."""

__version__ = "0.1.0"

from .render import PLOT_KINDS, PlotJob, SchemaError, manifest_hash, render

__all__ = ["PLOT_KINDS", "PlotJob", "SchemaError", "manifest_hash", "render"]
