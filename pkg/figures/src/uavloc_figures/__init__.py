"""Figure rendering for the UAV localization simulator's CSV outputs."""

from .io import SchemaError, load_many, load_rows
from .render import render_cdf, render_map, render_qcurve

__version__ = "0.1.0"
