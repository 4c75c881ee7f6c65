"""Figure rendering for persisted simulation outputs."""

from .render import FIGURES, SchemaError, render

__version__ = "0.1.0"
__all__ = ["FIGURES", "SchemaError", "render"]
