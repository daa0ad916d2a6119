"""Figure generation for audit-experiment CSV outputs."""

__version__ = "0.1.0"

from .figures import (
    DEFAULT_SMOOTH_WINDOW,
    FIGURE_KINDS,
    FigureSpec,
    PlotError,
    moving_average,
    render,
)
