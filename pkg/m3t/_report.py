# -*- coding: utf-8 -*-
# Copyright (C) 2025 by the m3t developers
# All rights reserved. BSD 3-clause License.
# This file is part of the m3t package. Details of the copyright
# and user license can be found in the 'LICENSE' file distributed
# with the package.

"""Report tables and figures."""

import logging
import os
from typing import Dict, List, Sequence

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from ._errors import EmptyCounts
from ._harness import BacktestReport
from ._hmdp import SUBGOALS
from ._plot import plot_subgoals

logger = logging.getLogger(__name__)


def subgoal_speed(counts: Sequence[int]) -> float:
    """Count-weighted mean speed of the selected subgoals.

    The speed of a subgoal is its size fraction per 100 steps, so a
    tranche executed entirely with subgoal #5 has speed 0.16.

    Args:
        counts: Selection count of each of the nine subgoals.

    Raises:
        EmptyCounts: If the counts are empty, negative or all zero.
    """
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (len(SUBGOALS),) or np.any(counts < 0) or counts.sum() == 0:
        raise EmptyCounts(f"Invalid subgoal counts {counts.tolist()}.")
    speeds = np.array([g.speed for g in SUBGOALS])
    return float(np.dot(speeds, counts) / counts.sum())


def tranche_speeds(counts: np.ndarray) -> np.ndarray:
    """Subgoal speed per tranche, ``NaN`` for tranches without subgoals."""
    return np.array(
        [subgoal_speed(row) if np.sum(row) > 0 else np.nan for row in np.asarray(counts)]
    )


def _cell(report: BacktestReport) -> str:
    return f"{report.mean:.2f}±{report.std:.2f}"


def slippage_table(reports: Sequence[BacktestReport]) -> pd.DataFrame:
    """Strategy by dataset grid of ``mean±std`` daily slippage cells.

    Rows and columns keep their order of first appearance.
    """
    strategies: List[str] = []
    datasets: List[str] = []
    cells: Dict[tuple, str] = {}
    for r in reports:
        if r.strategy not in strategies:
            strategies.append(r.strategy)
        if r.dataset not in datasets:
            datasets.append(r.dataset)
        cells[(r.strategy, r.dataset)] = _cell(r)
    rows = [[s] + [cells.get((s, d), "") for d in datasets] for s in strategies]
    return pd.DataFrame(rows, columns=["strategy"] + datasets)


def subgoal_table(reports: Sequence[BacktestReport]) -> pd.DataFrame:
    """Long table ``strategy,dataset,tranche,subgoal_id,count``."""
    rows = []
    for r in reports:
        counts = r.counts
        for t in range(counts.shape[0]):
            for g in range(counts.shape[1]):
                rows.append((r.strategy, r.dataset, t + 1, g + 1, int(counts[t, g])))
    return pd.DataFrame(rows, columns=["strategy", "dataset", "tranche", "subgoal_id", "count"])


def speed_table(reports: Sequence[BacktestReport]) -> pd.DataFrame:
    """Long table ``strategy,dataset,tranche,speed``."""
    rows = []
    for r in reports:
        for t, u in enumerate(tranche_speeds(r.counts)):
            rows.append((r.strategy, r.dataset, t + 1, u))
    return pd.DataFrame(rows, columns=["strategy", "dataset", "tranche", "speed"])


def emit_report(
    reports: Sequence[BacktestReport], output_dir: str, figures: bool = False
) -> List[str]:
    """Write report tables (and optionally figures) to `output_dir`.

    Files written are ``slippage.csv`` (strategy by dataset grid),
    ``subgoals.csv`` (subgoal counts per tranche) and ``speed.csv``
    (subgoal speed per tranche). With `figures`, a subgoal count and
    speed figure is saved for each report that selected subgoals.

    Returns:
        Paths of the files written.
    """
    os.makedirs(output_dir, exist_ok=True)
    written = []
    tables = {
        "slippage.csv": slippage_table(reports),
        "subgoals.csv": subgoal_table(reports),
        "speed.csv": speed_table(reports),
    }
    for name, frame in tables.items():
        path = os.path.join(output_dir, name)
        frame.to_csv(path, index=False, lineterminator="\n", float_format="%.6f")
        written.append(path)
    if figures:
        for r in reports:
            counts = r.counts
            if counts.sum() == 0:
                continue
            fig = plot_subgoals(
                counts, tranche_speeds(counts), title=f"{r.strategy} ({r.dataset})", show=False
            )
            path = os.path.join(output_dir, f"subgoals_{r.strategy}_{r.dataset}.png")
            fig.save(path)
            plt.close(fig.figure)
            written.append(path)
    for path in written:
        logger.info("Wrote %s", path)
    return written
