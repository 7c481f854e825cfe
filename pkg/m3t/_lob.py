# -*- coding: utf-8 -*-
# Copyright (C) 2025 by the m3t developers
# All rights reserved. BSD 3-clause License.
# This file is part of the m3t package. Details of the copyright
# and user license can be found in the 'LICENSE' file distributed
# with the package.

"""Market data types, ingest and synthetic trading days."""

import logging
import os
import re
from dataclasses import dataclass, field, fields
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ._config import coerce_fields, parse_key_value_file
from ._errors import (
    CrossedBook,
    DataError,
    InvalidParams,
    MalformedRow,
    MissingFile,
    ShortDay,
    ZeroVolumeDay,
)

logger = logging.getLogger(__name__)

#: Quote levels per book side.
LEVELS = 5
#: Snapshot cadence in milliseconds.
SNAPSHOT_INTERVAL_MS = 3000
#: Number of tranches per trading day.
N_TRANCHES = 8
#: Snapshots (simulation steps) per 30-minute tranche.
STEPS_PER_TRANCHE = 600
#: Snapshots per trading day.
STEPS_PER_DAY = N_TRANCHES * STEPS_PER_TRANCHE
#: Minimum trading unit in shares.
LOT = 100
#: Currency value of one price tick.
TICK_SIZE = 0.01

SNAPSHOT_COLUMNS = (
    ["ts"]
    + [f"bp{k}" for k in range(1, LEVELS + 1)]
    + [f"bv{k}" for k in range(1, LEVELS + 1)]
    + [f"ap{k}" for k in range(1, LEVELS + 1)]
    + [f"av{k}" for k in range(1, LEVELS + 1)]
)
TRADE_COLUMNS = ["ts", "price", "volume"]


def _book_violation(
    bid_prices: np.ndarray,
    bid_volumes: np.ndarray,
    ask_prices: np.ndarray,
    ask_volumes: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """Locate snapshot rows violating the book invariants.

    All arguments have shape (`N`, :data:`LEVELS`).

    Returns:
        Boolean arrays `crossed` and `malformed` of shape (`N`,).
    """
    crossed = (bid_volumes[:, 0] > 0) & (ask_volumes[:, 0] > 0)
    crossed &= ask_prices[:, 0] <= bid_prices[:, 0]
    malformed = (bid_volumes < 0).any(axis=1) | (ask_volumes < 0).any(axis=1)
    for vol, prc, sign in ((bid_volumes, bid_prices, -1), (ask_volumes, ask_prices, 1)):
        empty = vol == 0
        # an empty level must be followed only by empty levels
        malformed |= (empty[:, :-1] & ~empty[:, 1:]).any(axis=1)
        live = ~empty[:, :-1] & ~empty[:, 1:]
        step = sign * np.diff(prc, axis=1)
        malformed |= (live & (step <= 0)).any(axis=1)
    malformed |= ((bid_prices <= 0) & (bid_volumes > 0)).any(axis=1)
    malformed |= ((ask_prices <= 0) & (ask_volumes > 0)).any(axis=1)
    return crossed, malformed


@dataclass(frozen=True)
class LobSnapshot:
    """One level-2 quote snapshot.

    Args:
        timestamp: Milliseconds since day open.
        bid_prices: Bid prices in ticks, best first.
        bid_volumes: Bid volumes in shares.
        ask_prices: Ask prices in ticks, best first.
        ask_volumes: Ask volumes in shares.
    """

    timestamp: int
    bid_prices: Tuple[int, ...]
    bid_volumes: Tuple[int, ...]
    ask_prices: Tuple[int, ...]
    ask_volumes: Tuple[int, ...]

    def __post_init__(self):
        arrays = [
            np.asarray(getattr(self, f), dtype=np.int64).reshape(1, -1)
            for f in ("bid_prices", "bid_volumes", "ask_prices", "ask_volumes")
        ]
        if any(a.shape[1] != LEVELS for a in arrays):
            raise MalformedRow(None, f"snapshot must have {LEVELS} levels per side")
        crossed, malformed = _book_violation(*arrays)
        if crossed[0]:
            raise CrossedBook(None)
        if malformed[0]:
            raise MalformedRow(None, "book levels violate ordering or volume rules")

    @property
    def bid1(self) -> int:
        return self.bid_prices[0]

    @property
    def ask1(self) -> int:
        return self.ask_prices[0]

    @property
    def mid(self) -> float:
        return 0.5 * (self.bid_prices[0] + self.ask_prices[0])


@dataclass(frozen=True)
class TradeRecord:
    """One executed market trade.

    Args:
        timestamp: Milliseconds since day open.
        price: Trade price in ticks.
        volume: Traded shares.
    """

    timestamp: int
    price: int
    volume: int

    def __post_init__(self):
        if self.volume <= 0:
            raise MalformedRow(None, "trade volume must be positive")


@dataclass(frozen=True)
class VolumeProfile:
    """Per-tranche share of daily traded volume.

    Args:
        fractions: Eight non-negative fractions summing to one.
    """

    fractions: Tuple[float, ...]

    def __post_init__(self):
        f = np.asarray(self.fractions, dtype=np.float64)
        if f.shape != (N_TRANCHES,):
            raise DataError(f"Volume profile must have {N_TRANCHES} entries.")
        if np.any(f < 0.0) or np.any(f > 1.0) or abs(f.sum() - 1.0) > 1e-9:
            raise DataError(f"Volume profile {tuple(f)} is not on the simplex.")
        object.__setattr__(self, "fractions", tuple(float(v) for v in f))

    def as_array(self) -> np.ndarray:
        return np.array(self.fractions)

    @classmethod
    def uniform(cls) -> "VolumeProfile":
        return cls((1.0 / N_TRANCHES,) * N_TRANCHES)


def _readonly(a: np.ndarray, dtype=np.int64) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TradingDay:
    """Time-ordered snapshots and trades of one trading day.

    Snapshot arrays have shape (`N`, :data:`LEVELS`) and trade arrays
    shape (`M`,). All arrays are read-only. Step `t` of the day is
    snapshot `t`; the trades of step `t` are those with timestamp in
    (`timestamps[t-1]`, `timestamps[t]`].

    Args:
        day_id: Day identifier.
        timestamps: Snapshot timestamps (ms since open).
        bid_prices: Bid prices in ticks.
        bid_volumes: Bid volumes in shares.
        ask_prices: Ask prices in ticks.
        ask_volumes: Ask volumes in shares.
        trade_timestamps: Trade timestamps (ms since open).
        trade_prices: Trade prices in ticks.
        trade_volumes: Trade volumes in shares.
    """

    day_id: str
    timestamps: np.ndarray
    bid_prices: np.ndarray
    bid_volumes: np.ndarray
    ask_prices: np.ndarray
    ask_volumes: np.ndarray
    trade_timestamps: np.ndarray
    trade_prices: np.ndarray
    trade_volumes: np.ndarray
    step_offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for f in fields(self):
            if f.name not in ("day_id", "step_offsets"):
                object.__setattr__(self, f.name, _readonly(getattr(self, f.name)))
        if self.timestamps.shape[0] < STEPS_PER_DAY:
            raise ShortDay(self.timestamps.shape[0])
        steps = np.searchsorted(self.timestamps, self.trade_timestamps, side="left")
        offsets = np.searchsorted(steps, np.arange(self.n_snapshots + 1), side="left")
        object.__setattr__(self, "step_offsets", _readonly(offsets))

    @property
    def n_snapshots(self) -> int:
        return int(self.timestamps.shape[0])

    @property
    def n_trades(self) -> int:
        return int(self.trade_timestamps.shape[0])

    @property
    def tranche_boundaries(self) -> Tuple[Tuple[int, int], ...]:
        """Half-open snapshot index ranges of the eight tranches."""
        return tuple(
            (i * STEPS_PER_TRANCHE, (i + 1) * STEPS_PER_TRANCHE)
            for i in range(N_TRANCHES)
        )

    def snapshot(self, t: int) -> LobSnapshot:
        """Snapshot at step `t` as a :class:`LobSnapshot`."""
        return LobSnapshot(
            timestamp=int(self.timestamps[t]),
            bid_prices=tuple(int(v) for v in self.bid_prices[t]),
            bid_volumes=tuple(int(v) for v in self.bid_volumes[t]),
            ask_prices=tuple(int(v) for v in self.ask_prices[t]),
            ask_volumes=tuple(int(v) for v in self.ask_volumes[t]),
        )

    @property
    def snapshots(self) -> List[LobSnapshot]:
        return [self.snapshot(t) for t in range(self.n_snapshots)]

    @property
    def trades(self) -> List[TradeRecord]:
        return [
            TradeRecord(int(ts), int(p), int(v))
            for ts, p, v in zip(
                self.trade_timestamps, self.trade_prices, self.trade_volumes
            )
        ]

    def step_trades(self, t: int) -> slice:
        """Index range of the trades belonging to step `t`."""
        return slice(int(self.step_offsets[t]), int(self.step_offsets[t + 1]))

    def steps_trades(self, start: int, stop: int) -> slice:
        """Index range of the trades of steps `start` to `stop - 1`."""
        return slice(int(self.step_offsets[start]), int(self.step_offsets[stop]))

    @staticmethod
    def tranche_of_step(t: int) -> int:
        return min(t // STEPS_PER_TRANCHE, N_TRANCHES - 1)

    def traded_volume(self, start: int, stop: int) -> int:
        """Market volume traded during steps `start` to `stop - 1`."""
        return int(self.trade_volumes[self.steps_trades(start, stop)].sum())

    def market_vwap(self, start: int, stop: int) -> Optional[float]:
        """Market VWAP in ticks over steps `start` to `stop - 1`.

        Returns:
            VWAP, or ``None`` if no trades occurred in the range.
        """
        sl = self.steps_trades(start, stop)
        vol = self.trade_volumes[sl]
        total = vol.sum()
        if total == 0:
            return None
        return float(np.dot(self.trade_prices[sl], vol) / total)

    def mid(self, t: int) -> float:
        return 0.5 * float(self.bid_prices[t, 0] + self.ask_prices[t, 0])


def _day_id_from_path(path: str) -> str:
    return os.path.basename(path).split(".")[0]


def _read_int_csv(path: str, columns: Sequence[str]) -> np.ndarray:
    """Read an all-integer CSV file with a fixed header.

    Raises:
        MissingFile: If the file does not exist.
        MalformedRow: If the header, a field count or a value is invalid.
    """
    if not os.path.exists(path):
        raise MissingFile(path)
    try:
        df = pd.read_csv(path, dtype=str, skipinitialspace=True, engine="python")
    except pd.errors.ParserError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise MalformedRow(int(m.group(1)) if m else None, str(exc), path) from exc
    except pd.errors.EmptyDataError as exc:
        raise MalformedRow(1, "empty file", path) from exc
    if [c.strip() for c in df.columns] != list(columns):
        raise MalformedRow(1, f"expected header {','.join(columns)}", path)
    values = df.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    bad = values.isna().any(axis=1).to_numpy()
    bad |= ((values.fillna(0) % 1) != 0).any(axis=1).to_numpy()
    if bad.any():
        row = int(np.argmax(bad))
        raise MalformedRow(row + 2, "missing or non-integer value", path)
    return values.to_numpy(dtype=np.int64)


def _resample(table: np.ndarray) -> np.ndarray:
    """Resample snapshot rows to the fixed cadence.

    Each grid time takes the last snapshot observed at or before it.
    """
    ts = table[:, 0]
    grid = np.arange(ts[0], ts[-1] + 1, SNAPSHOT_INTERVAL_MS)
    idx = np.searchsorted(ts, grid, side="right") - 1
    out = table[idx].copy()
    out[:, 0] = grid
    return out


def load_day(
    snapshot_file: str, trade_file: str, day_id: Optional[str] = None
) -> TradingDay:
    """Load and validate one trading day.

    Snapshot feeds denser or irregular relative to the 3 s cadence are
    resampled by last-observation-carried-forward. Days longer than eight
    tranches are truncated.

    Args:
        snapshot_file: Snapshot CSV path (header
           ``ts,bp1..bp5,bv1..bv5,ap1..ap5,av1..av5``).
        trade_file: Trade CSV path (header ``ts,price,volume``).
        day_id: Day identifier. Defaults to the snapshot file name up to
           the first ``.``.

    Returns:
        Validated trading day.

    Raises:
        MissingFile: If either file does not exist.
        MalformedRow: If a row cannot be parsed or violates an invariant.
        CrossedBook: If a snapshot has ask1 <= bid1.
        ShortDay: If fewer than 4800 snapshots remain after resampling.
    """
    snaps = _read_int_csv(snapshot_file, SNAPSHOT_COLUMNS)
    trades = _read_int_csv(trade_file, TRADE_COLUMNS)
    bp, bv, ap, av = (snaps[:, 1 + k * LEVELS : 1 + (k + 1) * LEVELS] for k in range(4))
    crossed, malformed = _book_violation(bp, bv, ap, av)
    if snaps.shape[0] > 1:
        malformed[1:] |= np.diff(snaps[:, 0]) <= 0
    if crossed.any() or malformed.any():
        row = int(np.argmax(crossed | malformed))
        if crossed[row]:
            raise CrossedBook(row + 2, snapshot_file)
        raise MalformedRow(row + 2, "book invariant violated", snapshot_file)
    bad = (trades[:, 2] <= 0) | (trades[:, 1] <= 0)
    if trades.shape[0] > 1:
        bad[1:] |= np.diff(trades[:, 0]) < 0
    if bad.any():
        row = int(np.argmax(bad))
        raise MalformedRow(row + 2, "invalid trade", trade_file)

    if snaps.shape[0] > 1 and np.any(np.diff(snaps[:, 0]) != SNAPSHOT_INTERVAL_MS):
        logger.info(
            "Resampling %s from %d rows to %d ms cadence",
            snapshot_file,
            snaps.shape[0],
            SNAPSHOT_INTERVAL_MS,
        )
        snaps = _resample(snaps)
    if snaps.shape[0] < STEPS_PER_DAY:
        raise ShortDay(snaps.shape[0], snapshot_file)
    if snaps.shape[0] > STEPS_PER_DAY:
        logger.warning(
            "Truncating %s from %d to %d snapshots",
            snapshot_file,
            snaps.shape[0],
            STEPS_PER_DAY,
        )
        snaps = snaps[:STEPS_PER_DAY]

    day = TradingDay(
        day_id=day_id if day_id is not None else _day_id_from_path(snapshot_file),
        timestamps=snaps[:, 0],
        bid_prices=snaps[:, 1 : 1 + LEVELS],
        bid_volumes=snaps[:, 1 + LEVELS : 1 + 2 * LEVELS],
        ask_prices=snaps[:, 1 + 2 * LEVELS : 1 + 3 * LEVELS],
        ask_volumes=snaps[:, 1 + 3 * LEVELS :],
        trade_timestamps=trades[:, 0],
        trade_prices=trades[:, 1],
        trade_volumes=trades[:, 2],
    )
    logger.info(
        "Loaded day %s: %d snapshots, %d trades",
        day.day_id,
        day.n_snapshots,
        day.n_trades,
    )
    return day


def write_day(day: TradingDay, snapshot_file: str, trade_file: str):
    """Write a trading day in the snapshot and trade CSV formats.

    Args:
        day: Trading day.
        snapshot_file: Snapshot CSV path.
        trade_file: Trade CSV path.
    """
    snaps = np.column_stack(
        (day.timestamps, day.bid_prices, day.bid_volumes, day.ask_prices, day.ask_volumes)
    )
    pd.DataFrame(snaps, columns=SNAPSHOT_COLUMNS).to_csv(
        snapshot_file, index=False, lineterminator="\n"
    )
    trades = np.column_stack((day.trade_timestamps, day.trade_prices, day.trade_volumes))
    pd.DataFrame(trades.reshape(-1, 3), columns=TRADE_COLUMNS).to_csv(
        trade_file, index=False, lineterminator="\n"
    )


def load_replay_dir(path: str) -> List[TradingDay]:
    """Load all trading days in a replay directory.

    The directory holds file pairs ``<day_id>.snapshots.csv`` and
    ``<day_id>.trades.csv``. Day ids listed (one per line) in an optional
    ``excluded_days.txt`` file, i.e. days on which the price reached the
    daily limit, are skipped.

    Args:
        path: Replay directory.

    Returns:
        Trading days ordered by day id.
    """
    if not os.path.isdir(path):
        raise MissingFile(path)
    excluded = set()
    flag_file = os.path.join(path, "excluded_days.txt")
    if os.path.exists(flag_file):
        with open(flag_file) as f:
            excluded = {line.strip() for line in f if line.strip()}
    days = []
    suffix = ".snapshots.csv"
    for name in sorted(os.listdir(path)):
        if not name.endswith(suffix):
            continue
        day_id = name[: -len(suffix)]
        if day_id in excluded:
            logger.warning("Skipping price-limit day %s", day_id)
            continue
        days.append(
            load_day(
                os.path.join(path, name),
                os.path.join(path, day_id + ".trades.csv"),
                day_id=day_id,
            )
        )
    return days


@dataclass(frozen=True)
class SynthParams:
    """Synthetic trading day generator parameters.

    Args:
        base_price_ticks: Opening bid price in ticks.
        tick_size: Currency value of one tick.
        u_amplitude: Amplitude of the U-shaped intraday trading
           intensity (0 for uniform intensity, must be less than 1.5).
        noise_scale: Log-scale standard deviation of per-tranche volume
           noise.
        avg_daily_volume: Expected daily traded volume in shares.
        u_drift: Relative amplitude drift across days.
        drift_period_days: Period, in days, of the amplitude drift.
        tick_move_prob: Probability of a one tick move of the book per
           step.
        mean_trade_lots: Mean trade size in lots.
    """

    base_price_ticks: int = 1000
    tick_size: float = TICK_SIZE
    u_amplitude: float = 1.0
    noise_scale: float = 0.1
    avg_daily_volume: int = 20_000_000
    u_drift: float = 0.0
    drift_period_days: float = 40.0
    tick_move_prob: float = 0.05
    mean_trade_lots: float = 3.0

    def validate(self):
        """Check parameter ranges.

        Raises:
            InvalidParams: If a parameter is out of range.
        """
        if self.base_price_ticks <= LEVELS or self.tick_size <= 0:
            raise InvalidParams("Base price and tick size must be positive.")
        amp_max = abs(self.u_amplitude) * (1.0 + abs(self.u_drift))
        if self.u_amplitude < 0 or amp_max >= 1.5:
            raise InvalidParams("U-shape amplitude must lie in [0, 1.5).")
        if self.noise_scale < 0 or self.avg_daily_volume <= 0:
            raise InvalidParams("Noise scale and daily volume must be non-negative.")
        if not 0 <= self.tick_move_prob <= 1 or self.mean_trade_lots < 1:
            raise InvalidParams("Invalid price move probability or trade size.")
        if self.drift_period_days <= 0:
            raise InvalidParams("Drift period must be positive.")


def load_synth_params(path: str) -> SynthParams:
    """Read generator parameters from a ``key=value`` file."""
    params = SynthParams(**coerce_fields(SynthParams, parse_key_value_file(path), path))
    params.validate()
    return params


def intensity_shape(params: SynthParams, day_index: int = 0) -> np.ndarray:
    """Expected relative trading intensity for each step of a day.

    A quadratic U shape with unit mean, high at open and close and a
    trough mid-day.
    """
    amp = params.u_amplitude * (
        1.0 + params.u_drift * np.sin(2 * np.pi * day_index / params.drift_period_days)
    )
    x = (np.arange(STEPS_PER_DAY) + 0.5) / STEPS_PER_DAY
    return 1.0 + amp * ((2.0 * x - 1.0) ** 2 - 1.0 / 3.0)


def generate_synthetic_day(
    seed: int, params: Optional[SynthParams] = None, day_index: int = 0
) -> TradingDay:
    """Generate a deterministic synthetic trading day.

    The bid follows a lazy one-tick random walk with a one or two tick
    spread; five strictly monotone levels per side carry positive
    volume. Trade counts per step are Poisson with a U-shaped intraday
    intensity, scaled per tranche by log-normal noise, and trades print
    at bid1 or ask1 of the closing snapshot of their step, occasionally
    one tick through.

    Args:
        seed: Random seed.
        params: Generator parameters (defaults if ``None``).
        day_index: Index of the day in a multi-day set, selecting the
           phase of the intensity amplitude drift.

    Returns:
        Synthetic trading day with id ``synth-<seed>-<day_index>``.

    Raises:
        InvalidParams: If the parameters are invalid.
    """
    params = SynthParams() if params is None else params
    params.validate()
    rng = np.random.default_rng(np.random.SeedSequence([seed, day_index]))
    n = STEPS_PER_DAY

    shape = intensity_shape(params, day_index)
    noise = rng.normal(size=N_TRANCHES)
    factor = np.exp(params.noise_scale * noise - 0.5 * params.noise_scale**2)
    step_volume = params.avg_daily_volume / n * shape * np.repeat(factor, STEPS_PER_TRANCHE)

    p = params.tick_move_prob
    moves = rng.choice(np.array([-1, 0, 1]), size=n, p=[p / 2, 1 - p, p / 2])
    moves[0] = 0
    bid1 = np.maximum(params.base_price_ticks + np.cumsum(moves), LEVELS + 1)
    spread = 1 + (rng.random(n) < 0.2).astype(np.int64)
    ask1 = bid1 + spread
    depth = np.arange(LEVELS)
    bid_prices = bid1[:, None] - depth
    ask_prices = ask1[:, None] + depth

    level_lots = (4.0 * step_volume / LOT)[:, None] * (1.0 + 0.25 * depth)
    bid_volumes = LOT * np.maximum(1, rng.poisson(level_lots * rng.lognormal(0, 0.3, (n, LEVELS))))
    ask_volumes = LOT * np.maximum(1, rng.poisson(level_lots * rng.lognormal(0, 0.3, (n, LEVELS))))

    counts = rng.poisson(step_volume / (LOT * params.mean_trade_lots))
    counts[0] = 0
    step = np.repeat(np.arange(n), counts)
    m = step.shape[0]
    volumes = LOT * rng.geometric(1.0 / params.mean_trade_lots, size=m)
    buyer = rng.random(m) < 0.5
    through = (rng.random(m) < 0.05).astype(np.int64)
    prices = np.where(buyer, ask1[step] + through, bid1[step] - through)
    timestamps = step * SNAPSHOT_INTERVAL_MS
    offsets = rng.integers(0, SNAPSHOT_INTERVAL_MS, size=m)
    trade_ts = timestamps - offsets
    order = np.lexsort((-offsets, step))
    trade_ts, prices, volumes = trade_ts[order], prices[order], volumes[order]

    return TradingDay(
        day_id=f"synth-{seed}-{day_index}",
        timestamps=np.arange(n) * SNAPSHOT_INTERVAL_MS,
        bid_prices=bid_prices,
        bid_volumes=bid_volumes,
        ask_prices=ask_prices,
        ask_volumes=ask_volumes,
        trade_timestamps=trade_ts,
        trade_prices=prices,
        trade_volumes=volumes,
    )


def generate_synthetic_days(
    seed: int, params: Optional[SynthParams] = None, n_days: int = 21
) -> List[TradingDay]:
    """Generate a sequence of synthetic trading days.

    Args:
        seed: Random seed of the sequence.
        params: Generator parameters.
        n_days: Number of days.

    Returns:
        List of days with consecutive day indices.
    """
    return [generate_synthetic_day(seed, params, k) for k in range(n_days)]


def compute_profile(day: TradingDay) -> VolumeProfile:
    """Compute the tranche volume profile of a day.

    Args:
        day: Trading day.

    Returns:
        Fractions of the day's traded volume falling in each tranche.

    Raises:
        ZeroVolumeDay: If no volume traded during the day.
    """
    bounds = [b for b, _ in day.tranche_boundaries] + [STEPS_PER_DAY]
    cum = np.concatenate(([0], np.cumsum(day.trade_volumes)))
    at = cum[day.step_offsets[bounds]]
    vols = np.diff(at).astype(np.float64)
    total = vols.sum()
    if total <= 0:
        raise ZeroVolumeDay(f"Day {day.day_id} has no traded volume.")
    return VolumeProfile(tuple(vols / total))
