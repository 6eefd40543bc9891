"""mcflab-viz: static figures from mcflab run artifacts."""

from .figures import FIGURE_KINDS, FigureSpec, SchemaError, render

__all__ = ["FIGURE_KINDS", "FigureSpec", "SchemaError", "render"]
__version__ = "0.1.0"
