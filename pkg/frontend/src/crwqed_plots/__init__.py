"""Figure rendering for crwqed CSV output files."""

from .figures import (
    KINDS,
    FigureSpec,
    PanelReport,
    RenderError,
    RenderReport,
    load_table,
    render,
)

__all__ = [
    "KINDS",
    "FigureSpec",
    "PanelReport",
    "RenderError",
    "RenderReport",
    "load_table",
    "render",
]
