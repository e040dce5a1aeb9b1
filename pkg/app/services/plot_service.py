"""
Plot Service for morphdiv
Renders report data as SVG: scatter, stacked histogram, 100% stacked bars and density curves
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from app.exceptions import UsageError  # noqa: E402
from app.models.schemas import QuadraticFit  # noqa: E402

# Configure logging
logger = logging.getLogger(__name__)

FIGURE_SIZE = (6.0, 4.0)
DPI = 72

# Fixed ids and no timestamp keep SVG output byte-stable between runs
SVG_STYLE = {
    "svg.hashsalt": "morphdiv",
    "svg.fonttype": "none",
    "figure.dpi": DPI,
    "savefig.dpi": DPI,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


class PlotService:
    """Service for SVG rendering; no analysis happens here"""

    def scatter(self, x: Sequence[float], y: Sequence[float], xlabel: str = "", ylabel: str = "",
                title: str = "", fit: Optional[QuadraticFit] = None,
                yerr: Optional[Sequence[float]] = None) -> Figure:
        """
        Scatter plot, optionally with a fitted parabola or error bars

        Args:
            x: X values
            y: Y values
            xlabel: X axis label
            ylabel: Y axis label
            title: Figure title
            fit: Parabola drawn over the x range
            yerr: Symmetric error bar half-widths

        Returns:
            Figure whose markers sit in the SVG group with id "points"
        """
        if len(x) != len(y):
            raise UsageError("Scatter needs x and y of equal length")
        fig, ax = self._figure(xlabel, ylabel, title)
        if len(x):
            ax.plot(x, y, linestyle="none", marker="o", markersize=4, color="tab:blue", gid="points")
            if yerr is not None:
                ax.errorbar(x, y, yerr=yerr, linestyle="none", ecolor="tab:gray", capsize=2, gid="errors")
            if fit is not None:
                grid = np.linspace(min(x), max(x), 100)
                ax.plot(grid, fit.a * grid ** 2 + fit.b * grid + fit.c, color="tab:red", gid="fit")
        return fig

    def stacked_histogram(self, series: Dict[str, Sequence[float]], bins: int = 20, xlabel: str = "",
                          ylabel: str = "count", title: str = "") -> Figure:
        """Histogram with one stacked layer per named series"""
        fig, ax = self._figure(xlabel, ylabel, title)
        filled = {name: values for name, values in series.items() if len(values)}
        if filled:
            ax.hist(list(filled.values()), bins=bins, stacked=True, label=list(filled.keys()))
            ax.legend()
        return fig

    def stacked_bars(self, labels: Sequence[str], segments: Dict[str, Sequence[float]], ylabel: str = "%",
                     title: str = "") -> Figure:
        """
        Bars stacked to 100% height per label

        Args:
            labels: One bar per label
            segments: Segment name -> one value per bar; each bar is rescaled to sum to 100

        Returns:
            Figure
        """
        fig, ax = self._figure("", ylabel, title)
        if not labels:
            return fig
        matrix = np.array([list(values) for values in segments.values()], dtype=float)
        if matrix.shape[1] != len(labels):
            raise UsageError("Every segment needs one value per bar")
        totals = matrix.sum(axis=0)
        if np.any(totals <= 0):
            raise UsageError("Every bar needs a positive total")
        shares = 100.0 * matrix / totals
        bottom = np.zeros(len(labels))
        positions = np.arange(len(labels))
        for name, heights in zip(segments.keys(), shares):
            ax.bar(positions, heights, bottom=bottom, label=name)
            bottom += heights
        ax.set_xticks(positions)
        ax.set_xticklabels(labels, rotation=45, ha="right")
        ax.set_ylim(0, 100)
        ax.legend()
        return fig

    def density(self, x: Sequence[float], y: Sequence[float], point_mass: Optional[float] = None,
                xlabel: str = "", title: str = "") -> Figure:
        """Density curve, or a vertical line for a point mass"""
        fig, ax = self._figure(xlabel, "density", title)
        if point_mass is not None:
            ax.axvline(point_mass, color="tab:blue", gid="point_mass")
        elif len(x):
            ax.plot(x, y, color="tab:blue", gid="density")
            ax.fill_between(x, y, alpha=0.2)
        ax.axvline(0.0, color="black", linewidth=0.5, linestyle="--")
        return fig

    def save_svg(self, fig: Figure, path: Path) -> Path:
        """Write a figure as SVG and close it"""
        path.parent.mkdir(parents=True, exist_ok=True)
        with matplotlib.rc_context(SVG_STYLE):
            fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        logger.info(f"Wrote {path}")
        return path

    @staticmethod
    def _figure(xlabel: str, ylabel: str, title: str):
        with matplotlib.rc_context(SVG_STYLE):
            fig, ax = plt.subplots(figsize=FIGURE_SIZE, dpi=DPI)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        return fig, ax


def finite_pairs(x: Sequence[Optional[float]], y: Sequence[Optional[float]]) -> List[tuple]:
    """Drop pairs with a missing side"""
    return [(a, b) for a, b in zip(x, y) if a is not None and b is not None]


# Global plot service instance
plot_service = PlotService()
