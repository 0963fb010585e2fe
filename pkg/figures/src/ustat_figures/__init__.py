"""Presentation layer for the hidim-ustat CSV outputs.

Everything here draws numbers straight from a CSV; no statistic, moment or
limit curve is ever recomputed.
"""

from .render import FigureJob, SchemaError, load_columns, render

__all__ = ["FigureJob", "SchemaError", "load_columns", "render"]
__version__ = "0.1.0"
