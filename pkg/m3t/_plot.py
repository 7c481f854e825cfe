# -*- coding: utf-8 -*-
# Copyright (C) 2025 by the m3t developers
# All rights reserved. BSD 3-clause License.
# This file is part of the m3t package. Details of the copyright
# and user license can be found in the 'LICENSE' file distributed
# with the package.

"""Report figures."""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import matplotlib as mpl
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from matplotlib.axes import Axes
from matplotlib.figure import Figure

from ._config import KW_ONLY

try:
    import mplcursors as mplcrs
except ImportError:
    HAVE_MPLCRS = False
else:
    HAVE_MPLCRS = True


def figure_and_axes(
    ax: Optional[Axes],
    figsize: Optional[Tuple[int, int]] = None,
    fignum: Optional[int] = None,
) -> Tuple[Figure, Axes, bool]:
    """Get figure from axes or create new figure and axes.

    Args:
        ax: If ``None`` create a new figure and axes, otherwise use the
           figure associated with the specified axes.
        figsize: Specify dimensions of figure to be created as a tuple
           (`width`, `height`) in inches.
        fignum: Figure number of figure to be created.

    Returns: A tuple consisting of the figure, axes, and a flag
        indicating whether a new figure was created.
    """
    if ax is None:
        fig, ax = plt.subplots(num=fignum, figsize=figsize)
        new_fig = True
    else:
        fig = ax.get_figure()
        new_fig = False
    return fig, ax, new_fig


@dataclass(repr=False, **KW_ONLY)
class GenericPlot:
    """Generic plot state.

    Args:
        figure: Plot figure.
        axes: Plot axes.
    """

    figure: Figure
    axes: Axes

    def save(self, path: str, dpi: int = 100):
        """Save the figure to an image file."""
        self.figure.savefig(path, dpi=dpi, bbox_inches="tight")


@dataclass(repr=False, **KW_ONLY)
class SubgoalPlot(GenericPlot):
    """State of a subgoal count and speed plot.

    Args:
        figure: Plot figure.
        axes: Axes of the count bars.
        speed_axes: Twin axes of the speed curve.
        bars: Bar containers, one per subgoal.
        speed_line: Speed curve.
    """

    speed_axes: Axes
    bars: list
    speed_line: mpl.lines.Line2D


def plot_subgoals(
    counts: np.ndarray,
    speeds: Sequence[float],
    title: Optional[str] = None,
    figsize: Optional[Tuple[int, int]] = None,
    fignum: Optional[int] = None,
    ax: Optional[Axes] = None,
    show: bool = True,
) -> SubgoalPlot:
    """Plot subgoal counts per tranche with the subgoal speed curve.

    Counts are drawn as grouped bars, one group per tranche and one bar
    per subgoal; the speed is drawn on a twin `y` axis.

    Args:
        counts: Array of shape (tranches, subgoals).
        speeds: Subgoal speed per tranche (``NaN`` for empty tranches).
        title: Figure title.
        figsize: Specify dimensions of figure to be created as a tuple
           (`width`, `height`) in inches.
        fignum: Figure number of figure to be created.
        ax: Plot in specified axes instead of creating one.
        show: Call :meth:`~matplotlib.figure.Figure.show` on a newly
           created figure.

    Returns:
        Subgoal plot state object.
    """
    fig, ax, new_fig = figure_and_axes(ax, figsize=figsize, fignum=fignum)
    counts = np.asarray(counts)
    n_tranche, n_subgoal = counts.shape
    x = np.arange(1, n_tranche + 1)
    width = 0.8 / n_subgoal
    bars = [
        ax.bar(x + (k - (n_subgoal - 1) / 2) * width, counts[:, k], width, label=f"#{k + 1}")
        for k in range(n_subgoal)
    ]
    ax.set_xlabel("Tranche")
    ax.set_ylabel("Subgoal count")
    ax.set_xticks(x)
    ax.legend(ncol=3, fontsize="small", loc="upper left")

    sax = ax.twinx()
    (speed_line,) = sax.plot(x, speeds, "k-o", lw=1.5, ms=6.0)
    sax.set_ylabel("Subgoal speed")
    if title is not None:
        ax.set_title(title)

    if HAVE_MPLCRS:
        mplcrs.cursor(speed_line)

    if new_fig and show:
        fig.show()

    return SubgoalPlot(
        figure=fig, axes=ax, speed_axes=sax, bars=bars, speed_line=speed_line
    )


@dataclass(repr=False, **KW_ONLY)
class CurvePlot(GenericPlot):
    """State of a learning curve plot.

    Args:
        figure: Plot figure.
        axes: Plot axes.
        lines: Plotted curves.
    """

    lines: list


def plot_learning_curve(
    curve: pd.DataFrame,
    columns: Sequence[str] = ("slippage_bp", "meta_loss", "micro_loss"),
    window: int = 10,
    title: Optional[str] = None,
    figsize: Optional[Tuple[int, int]] = None,
    fignum: Optional[int] = None,
    ax: Optional[Axes] = None,
    show: bool = True,
) -> CurvePlot:
    """Plot learning curve columns against episode.

    Each column is smoothed by a trailing rolling mean over `window`
    episodes.
    """
    fig, ax, new_fig = figure_and_axes(ax, figsize=figsize, fignum=fignum)
    lines = []
    for col in columns:
        if col in curve:
            smooth = curve[col].rolling(window, min_periods=1).mean()
            lines.extend(ax.plot(curve["episode"], smooth, lw=1.5, label=col))
    ax.set_xlabel("Episode")
    if title is not None:
        ax.set_title(title)
    if lines:
        ax.legend()
    if new_fig and show:
        fig.show()
    return CurvePlot(figure=fig, axes=ax, lines=lines)
