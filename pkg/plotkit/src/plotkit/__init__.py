"""Figure rendering for exported loss-surface artifacts.

Purely presentational: every renderer is a file transform from the
documented CSV/JSON schemas to an image, recomputing nothing.
"""

from .render import STYLE_VERSION, FigureRequest, SchemaError, render

__all__ = ["FigureRequest", "SchemaError", "STYLE_VERSION", "render"]

__version__ = "0.1.0"
