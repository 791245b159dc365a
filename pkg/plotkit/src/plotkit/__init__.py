"""Offline rendering of simulator CSV outputs into figure files."""

from .figures import FigureSpec, SchemaError, render

__all__ = ["FigureSpec", "SchemaError", "render"]
