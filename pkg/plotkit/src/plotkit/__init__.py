"""Offline figure generation from link-simulator result tables."""

from .render import PlotSpec, render
from .tables import EXPECTED_HEADER, Row, TableError, load_tables, parse_table, saturation_level

__version__ = "0.1.0"

__all__ = [
    "EXPECTED_HEADER",
    "PlotSpec",
    "Row",
    "TableError",
    "load_tables",
    "parse_table",
    "render",
    "saturation_level",
]
