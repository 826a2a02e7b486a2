"""Report figures for chemoflow outputs (CSV histories, sweep/refinement
reports, volume snapshots), consumed purely through the documented formats."""

from .figures import FigureSpec, render
from .schema import SchemaError

__version__ = "0.1.0"
