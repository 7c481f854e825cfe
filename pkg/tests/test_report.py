import os

import numpy as np
import pandas as pd
import pytest

from m3t import BacktestReport, DayResult, EmptyCounts, Subgoal
from m3t._report import (
    emit_report,
    slippage_table,
    speed_table,
    subgoal_speed,
    subgoal_table,
    tranche_speeds,
)


def _counts(cells):
    counts = np.zeros((8, 9), dtype=int)
    for (t, g), n in cells.items():
        counts[t, g - 1] = n
    return tuple(tuple(int(c) for c in row) for row in counts)


def _report(strategy, dataset, slippages, cells=None):
    counts = _counts(cells or {})
    days = [DayResult(f"d{k}", s, 1000, 1000, 0, counts) for k, s in enumerate(slippages)]
    return BacktestReport(strategy, dataset, days)


def test_speed_single_subgoal():
    assert subgoal_speed(np.eye(9)[4] * 8) == pytest.approx(0.16)
    assert subgoal_speed(np.eye(9)[0]) == pytest.approx(0.1625)


def test_speed_mix():
    counts = np.zeros(9)
    counts[[0, 4]] = (1, 3)
    assert subgoal_speed(counts) == pytest.approx((0.1625 + 3 * 0.16) / 4)


def test_speed_brute_force(rng):
    speeds = [Subgoal(k).speed for k in range(1, 10)]
    for _ in range(100):
        counts = rng.integers(0, 6, size=9)
        if counts.sum() == 0:
            continue
        expected = sum(s * c for s, c in zip(speeds, counts)) / counts.sum()
        assert subgoal_speed(counts) == pytest.approx(expected)


@pytest.mark.parametrize("counts", [np.zeros(9), np.ones(8), -np.eye(9)[0]])
def test_speed_invalid(counts):
    with pytest.raises(EmptyCounts):
        subgoal_speed(counts)


def test_tranche_speeds_nan():
    counts = np.array(_counts({(0, 5): 2}))
    speeds = tranche_speeds(counts)
    assert speeds[0] == pytest.approx(0.16)
    assert np.all(np.isnan(speeds[1:]))


def test_slippage_table():
    reports = [
        _report("m3t", "synthetic", [1.0, 3.0]),
        _report("vwap", "synthetic", [-1.0]),
        _report("m3t", "other", [0.5, 0.5]),
    ]
    table = slippage_table(reports)
    assert list(table.columns) == ["strategy", "synthetic", "other"]
    assert table["strategy"].tolist() == ["m3t", "vwap"]
    assert table.loc[0, "synthetic"] == "2.00±1.00"
    assert table.loc[1, "synthetic"] == "-1.00±0.00"
    assert table.loc[1, "other"] == ""


def test_subgoal_and_speed_tables():
    report = _report("m3t", "synthetic", [0.0, 0.0], {(0, 5): 1, (7, 9): 2})
    counts = subgoal_table([report])
    assert len(counts) == 72
    row = counts[(counts.tranche == 1) & (counts.subgoal_id == 5)]
    assert row["count"].item() == 2
    assert counts["count"].sum() == 6
    speeds = speed_table([report])
    assert len(speeds) == 8
    assert speeds.loc[0, "speed"] == pytest.approx(0.16)
    assert np.isnan(speeds.loc[1, "speed"])


def test_empty_tables():
    assert len(slippage_table([])) == 0
    assert list(subgoal_table([]).columns) == ["strategy", "dataset", "tranche", "subgoal_id", "count"]
    assert len(speed_table([])) == 0


def test_emit_report(tmp_path):
    reports = [
        _report("m3t", "synthetic", [1.0, 3.0], {(2, 4): 1}),
        _report("vwap", "synthetic", [0.25]),
    ]
    out = str(tmp_path / "report")
    written = emit_report(reports, out, figures=True)
    names = sorted(os.path.basename(p) for p in written)
    assert names == [
        "slippage.csv",
        "speed.csv",
        "subgoals.csv",
        "subgoals_m3t_synthetic.png",
    ]
    frame = pd.read_csv(os.path.join(out, "speed.csv"))
    assert frame["speed"].isna().sum() == 15


def test_emit_report_deterministic(tmp_path):
    reports = [_report("m3t", "synthetic", [1.0, 3.0], {(0, 1): 3})]
    first = emit_report(reports, str(tmp_path / "a"))
    second = emit_report(reports, str(tmp_path / "b"))
    for a, b in zip(first, second):
        with open(a, "rb") as fa, open(b, "rb") as fb:
            assert fa.read() == fb.read()
