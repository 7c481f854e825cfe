# -*- coding: utf-8 -*-
# Copyright (C) 2025 by the m3t developers
# All rights reserved. BSD 3-clause License.
# This file is part of the m3t package. Details of the copyright
# and user license can be found in the 'LICENSE' file distributed
# with the package.

"""Hierarchical execution environment.

A trading day is executed as eight tranches. Within a tranche the Meta
Trader repeatedly selects a :class:`Subgoal`, which defines a
mini-tranche (a share count and a step budget), and the Micro Trader
executes the mini-tranche one simulator step at a time.
"""

import json
import logging
import math
import os
from collections import deque
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Deque, List, Optional, Tuple

import numpy as np

from ._config import KW_ONLY
from ._errors import (
    ConfigInvalid,
    DayExhausted,
    EnvironmentStateError,
    InvalidSubgoal,
    NegativeParent,
    NoActiveSubgoal,
    NoQuote,
    TrancheFilled,
)
from ._exchange import (
    IOTA,
    ExchangeSimulator,
    Fill,
    PriceChoice,
    Side,
    fills_vwap,
)
from ._lob import LEVELS, LOT, N_TRANCHES, STEPS_PER_TRANCHE, TradingDay

logger = logging.getLogger(__name__)

#: Snapshots in the Micro Trader market window.
WINDOW_ROWS = 20
#: Features per snapshot row.
N_FEATURES = 4 * LEVELS
#: Window volume history length used to normalize the last window volume.
VOLUME_HISTORY = 20

SUBGOAL_STEPS = (80, 100, 120)
SUBGOAL_FRACTIONS = (0.13, 0.16, 0.19)


@dataclass(frozen=True)
class Subgoal:
    """Meta Trader action.

    Subgoals are numbered row by row over the grid of maximum step counts
    (80, 100, 120) and mini-tranche size fractions (0.13, 0.16, 0.19),
    so that #1 is (80, 0.13), #2 is (80, 0.16) and #9 is (120, 0.19).

    Args:
        id: Subgoal number in 1..9.

    Raises:
        InvalidSubgoal: If `id` is not an integer in 1..9.
    """

    id: int
    max_steps: int = field(init=False)
    size_fraction: float = field(init=False)

    def __post_init__(self):
        if not isinstance(self.id, (int, np.integer)) or not 1 <= self.id <= 9:
            raise InvalidSubgoal(f"Subgoal id must lie in 1..9, got {self.id!r}.")
        row, col = divmod(int(self.id) - 1, 3)
        object.__setattr__(self, "max_steps", SUBGOAL_STEPS[row])
        object.__setattr__(self, "size_fraction", SUBGOAL_FRACTIONS[col])

    @property
    def index(self) -> int:
        """Zero-based index of the subgoal (network output unit)."""
        return self.id - 1

    @property
    def speed(self) -> float:
        """Size fraction per 100 steps."""
        return self.size_fraction / (self.max_steps / 100.0)

    def onehot(self) -> np.ndarray:
        v = np.zeros(len(SUBGOALS))
        v[self.index] = 1.0
        return v


SUBGOALS: Tuple[Subgoal, ...] = tuple(Subgoal(k) for k in range(1, 10))


class Action(IntEnum):
    """Micro Trader action.

    ``PASSIVE`` rests one lot at the own-side touch (ask1 when selling,
    bid1 when buying), ``CROSS`` prices one lot at the opposite touch
    and ``WAIT`` leaves any resting order untouched.
    """

    PASSIVE = 0
    CROSS = 1
    WAIT = 2

    def price_choice(self, side: Side) -> Optional[PriceChoice]:
        if self == Action.WAIT:
            return None
        own = PriceChoice.AT_ASK1 if side == Side.SELL else PriceChoice.AT_BID1
        other = PriceChoice.AT_BID1 if side == Side.SELL else PriceChoice.AT_ASK1
        return own if self == Action.PASSIVE else other


class Blame(Enum):
    """Agent penalized for an unfilled mini-tranche."""

    NONE = "none"
    META = "meta"
    MICRO = "micro"


@dataclass(frozen=True, **KW_ONLY)
class RewardConfig:
    """Reward parameters.

    Args:
        mode: Intrinsic reward mode, ``"dense"`` or ``"sparse"``.
        fail_penalty: Penalty (bp) for an unfilled mini-tranche.
        meta_blame_step_ratio: A failure is blamed on the Meta Trader
           when the minimum number of steps needed exceeds this fraction
           of the subgoal's maximum step count.
        meta_blame_liquidity_ratio: A failure is blamed on the Meta
           Trader when the mini-tranche exceeds this fraction of the
           market volume traded in its window.
    """

    mode: str = "dense"
    fail_penalty: float = -99.0
    meta_blame_step_ratio: float = 0.30
    meta_blame_liquidity_ratio: float = 0.05

    def __post_init__(self):
        if self.mode not in ("dense", "sparse"):
            raise ConfigInvalid(f"Unknown reward mode {self.mode!r}.")
        for name in ("meta_blame_step_ratio", "meta_blame_liquidity_ratio"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ConfigInvalid(f"{name} must lie in (0, 1).")

    @classmethod
    def from_config(cls, config) -> "RewardConfig":
        """Construct from an :class:`ExperimentConfig`."""
        return cls(
            mode=config.reward_mode,
            fail_penalty=config.fail_penalty,
            meta_blame_step_ratio=config.meta_blame_step_ratio,
            meta_blame_liquidity_ratio=config.meta_blame_liquidity_ratio,
        )


def slippage_bp(order_vwap: float, market_vwap: float, side: Side) -> float:
    """VWAP slippage in basis points.

    Positive values are favourable: a sell above, or a buy below, the
    market VWAP.
    """
    return float(side) * (order_vwap - market_vwap) / market_vwap * 1e4


def round_to_lot(shares: float) -> int:
    """Round a share count half up to a whole number of lots."""
    return int(math.floor(shares / LOT + 0.5)) * LOT


def lob_features(day: TradingDay) -> np.ndarray:
    """Normalized feature rows of all snapshots of a day.

    Prices are taken relative to the first mid price of the day and
    volumes are mapped by :math:`\\log(1 + v) / 10`. Each row is bid
    prices, bid volumes, ask prices and ask volumes, level 1 first.

    Returns:
        Array of shape (`N`, :data:`N_FEATURES`).
    """
    mid0 = day.mid(0)
    return np.concatenate(
        (
            (day.bid_prices - mid0) / mid0,
            np.log1p(day.bid_volumes) / 10.0,
            (day.ask_prices - mid0) / mid0,
            np.log1p(day.ask_volumes) / 10.0,
        ),
        axis=1,
    )


@dataclass(frozen=True, eq=False)
class ExtrinsicState:
    """Meta Trader observation.

    Args:
        liquidity: Normalized bid depth, ask depth and spread.
        tranche_progress: Elapsed fraction of the tranche time and filled
           fraction of the tranche quota.
        last_window_volume: Market volume per step during the previous
           execution window relative to its rolling mean (0 if none).
    """

    liquidity: Tuple[float, float, float]
    tranche_progress: Tuple[float, float]
    last_window_volume: float

    def as_array(self) -> np.ndarray:
        return np.array(
            self.liquidity + self.tranche_progress + (self.last_window_volume,)
        )


#: Length of :meth:`ExtrinsicState.as_array`.
EXTRINSIC_FEATURES = 6


@dataclass(frozen=True, eq=False)
class IntrinsicState:
    """Micro Trader observation.

    Args:
        lob_window: Features of the last :data:`WINDOW_ROWS` snapshots,
           oldest first, with zero rows before the start of the day.
        subgoal_onehot: One-hot subgoal encoding (all zero outside a
           subgoal).
        progress: Used fraction of the step budget and filled fraction of
           the mini-tranche.
    """

    lob_window: np.ndarray
    subgoal_onehot: np.ndarray
    progress: np.ndarray


@dataclass(**KW_ONLY)
class _Window:
    subgoal: Optional[Subgoal]
    size: int
    budget: int
    start: int
    tranche: int
    steps: int = 0
    filled: int = 0
    liquidated: int = 0
    fills: List[Fill] = field(default_factory=list)
    records: List[Tuple[int, float]] = field(default_factory=list)
    terminated: bool = False
    blame: Blame = Blame.NONE


@dataclass(frozen=True)
class SubgoalOutcome:
    """Summary of one executed mini-tranche (or subgoal-free window).

    Args:
        tranche: Tranche index.
        subgoal: Subgoal id, or 0 for a subgoal-free window.
        start: First step.
        steps: Steps used.
        size: Mini-tranche size in shares.
        liquidated: Shares executed by forced liquidation.
        blame: Agent penalized for a failure.
        reward: Extrinsic reward.
        deadline_missed: Whether the tranche deadline forced liquidation
           of the rest of the tranche.
    """

    tranche: int
    subgoal: int
    start: int
    steps: int
    size: int
    liquidated: int
    blame: Blame
    reward: float
    deadline_missed: bool = False

    @property
    def fulfilled(self) -> bool:
        return self.liquidated == 0


class ExecutionEnv:
    """Hierarchical execution environment over one trading day.

    Args:
        day: Trading day.
        side: Order direction.
        reward: Reward parameters.
        iota: Queue length estimator divisor of the simulator.
    """

    def __init__(
        self,
        day: TradingDay,
        side: Side = Side.SELL,
        reward: RewardConfig = RewardConfig(),
        iota: int = IOTA,
    ):
        self.day = day
        self.side = Side(side)
        self.reward = reward
        self.iota = iota
        self.features = lob_features(day)
        self.reset()

    def reset(self):
        """Restart the day with a fresh simulator."""
        self.sim = ExchangeSimulator(self.day, self.iota)
        self.tranche = -1
        self.quota = 0
        self.tranche_filled = 0
        self.tranche_start = 0
        self.tranche_end = 0
        self.last_window_volume = 0.0
        self._volume_history: Deque[float] = deque(maxlen=VOLUME_HISTORY)
        self._window: Optional[_Window] = None
        self.outcomes: List[SubgoalOutcome] = []
        self.trace: List[dict] = []

    # Tranche level

    @property
    def tranche_remaining(self) -> int:
        return self.quota - self.tranche_filled

    @property
    def tranche_done(self) -> bool:
        return self.tranche_remaining == 0

    @property
    def tranche_steps_left(self) -> int:
        return self.tranche_end - self.sim.step

    def begin_tranche(self, quota: int) -> ExtrinsicState:
        """Start the next tranche.

        The simulator idles forward to the first step of the tranche if
        the previous tranche finished early.

        Args:
            quota: Tranche order in shares (a multiple of the lot size).

        Returns:
            Initial extrinsic state.

        Raises:
            DayExhausted: If all tranches have been started.
            NegativeParent: If `quota` is negative or not lot aligned.
            EnvironmentStateError: If a window is still active.
        """
        if self._window is not None:
            raise EnvironmentStateError("Cannot start a tranche while a window is active.")
        index = self.tranche + 1
        if index >= N_TRANCHES:
            raise DayExhausted(f"All {N_TRANCHES} tranches of {self.day.day_id} started.")
        if quota < 0 or quota % LOT:
            raise NegativeParent(f"Invalid tranche quota {quota}.")
        self.sim.cancel()
        start = index * STEPS_PER_TRANCHE
        while self.sim.step < start:
            self.sim.advance_step()
        self.tranche = index
        self.quota = int(quota)
        self.tranche_filled = 0
        self.tranche_start = start
        self.tranche_end = min(start + STEPS_PER_TRANCHE, self.day.n_snapshots - 1)
        self.last_window_volume = 0.0
        return self.extrinsic_state()

    def extrinsic_state(self) -> ExtrinsicState:
        t = self.sim.step
        bid_depth = float(self.day.bid_volumes[t].sum())
        ask_depth = float(self.day.ask_volumes[t].sum())
        spread = float(self.day.ask_prices[t, 0] - self.day.bid_prices[t, 0])
        elapsed = (t - self.tranche_start) / STEPS_PER_TRANCHE
        filled = self.tranche_filled / self.quota if self.quota else 1.0
        return ExtrinsicState(
            liquidity=(np.log1p(bid_depth) / 10.0, np.log1p(ask_depth) / 10.0, spread / 10.0),
            tranche_progress=(min(elapsed, 1.0), min(filled, 1.0)),
            last_window_volume=self.last_window_volume,
        )

    # Window level

    def _open(self, subgoal: Optional[Subgoal], size: int, budget: int) -> IntrinsicState:
        if self._window is not None:
            raise EnvironmentStateError("A window is already active.")
        if self.tranche < 0:
            raise NoActiveSubgoal("No tranche has been started.")
        if self.tranche_done:
            raise TrancheFilled(f"Tranche {self.tranche} has no remaining quota.")
        self._window = _Window(
            subgoal=subgoal,
            size=size,
            budget=budget,
            start=self.sim.step,
            tranche=self.tranche,
        )
        return self.intrinsic_state()

    def begin_subgoal(self, subgoal: Subgoal) -> IntrinsicState:
        """Start a mini-tranche.

        The mini-tranche is :math:`V_g` times the tranche quota rounded to
        lots (at least one lot), clipped to the remaining quota. The step
        budget is :math:`T_g` clipped to the steps left in the tranche.

        Raises:
            TrancheFilled: If the tranche has no remaining quota.
        """
        subgoal = subgoal if isinstance(subgoal, Subgoal) else Subgoal(subgoal)
        size = max(round_to_lot(subgoal.size_fraction * self.quota), LOT)
        size = min(size, self.tranche_remaining)
        budget = min(subgoal.max_steps, self.tranche_steps_left)
        return self._open(subgoal, size, budget)

    def begin_window(self, steps: int, shares: int) -> IntrinsicState:
        """Start a subgoal-free execution window.

        Args:
            steps: Step budget, clipped to the steps left in the tranche.
            shares: Shares to execute, clipped to the remaining quota.

        Raises:
            TrancheFilled: If the tranche has no remaining quota.
        """
        size = min(max(int(shares), LOT), self.tranche_remaining)
        return self._open(None, size, min(int(steps), self.tranche_steps_left))

    def _active(self) -> _Window:
        if self._window is None:
            raise NoActiveSubgoal("No active subgoal.")
        return self._window

    def intrinsic_state(self) -> IntrinsicState:
        w = self._active()
        t = self.sim.step
        window = np.zeros((WINDOW_ROWS, N_FEATURES))
        first = max(0, t - WINDOW_ROWS + 1)
        window[WINDOW_ROWS - (t + 1 - first) :] = self.features[first : t + 1]
        onehot = w.subgoal.onehot() if w.subgoal is not None else np.zeros(len(SUBGOALS))
        progress = np.array(
            [w.steps / w.budget if w.budget else 1.0, w.filled / w.size if w.size else 1.0]
        )
        return IntrinsicState(window, onehot, progress)

    def _blame(self, w: _Window) -> Blame:
        if w.subgoal is None:
            return Blame.MICRO
        min_steps = math.ceil(w.size / LOT)
        market = self.day.traded_volume(w.start + 1, self.sim.step + 1)
        if (
            min_steps > self.reward.meta_blame_step_ratio * w.subgoal.max_steps
            or w.size > self.reward.meta_blame_liquidity_ratio * market
        ):
            return Blame.META
        return Blame.MICRO

    def _reference(self, t: int, fallback: int) -> float:
        vwap = self.day.market_vwap(t, t + 1)
        return vwap if vwap is not None else self.day.mid(fallback)

    def micro_step(self, action: Action) -> Tuple[IntrinsicState, float, bool]:
        """Apply a Micro Trader action and advance one step.

        The step reward compares the VWAP of this step's fills with the
        market VWAP of the same step. In dense mode it is returned every
        step (0 without fills); in sparse mode 0 is returned until the
        window terminates, when the volume-weighted mean of the step
        slippages is returned. When the window terminates any unfilled
        remainder is liquidated at market and, if the Micro Trader is
        blamed, the final reward is replaced by the failure penalty.

        Returns:
            New intrinsic state, intrinsic reward and termination flag.

        Raises:
            NoActiveSubgoal: If no window is active or it has terminated.
        """
        w = self._active()
        if w.terminated:
            raise NoActiveSubgoal("The active window has terminated.")
        action = Action(action)
        t = self.sim.step
        choice = action.price_choice(self.side)
        if choice is not None and w.filled < w.size:
            try:
                self.sim.issue_order(self.side, choice, min(LOT, w.size - w.filled))
            except NoQuote as exc:
                logger.debug("Treating %s as wait: %s", action.name, exc)
        report = self.sim.advance_step()
        fills = list(report.fills)
        w.steps += 1
        w.filled += sum(f.volume for f in fills)
        done = w.filled >= w.size or w.steps >= w.budget
        if done:
            self.sim.cancel()
            left = w.size - w.filled
            if left > 0:
                fills += self.sim.liquidate_market(self.side, left)
                self.sim.take_pending()
                w.liquidated = left
                w.filled = w.size
                w.blame = self._blame(w)
        w.fills.extend(fills)
        w.terminated = done

        volume, vwap = fills_vwap(fills)
        self.tranche_filled += volume
        slip = slippage_bp(vwap, self._reference(report.step, t), self.side) if volume else 0.0
        w.records.append((volume, slip))
        if self.reward.mode == "dense":
            reward = slip
        elif done:
            vols = np.array([v for v, _ in w.records], dtype=float)
            slips = np.array([s for _, s in w.records])
            reward = float(np.dot(vols, slips) / vols.sum()) if vols.sum() else 0.0
        else:
            reward = 0.0
        if done and w.blame == Blame.MICRO:
            reward = self.reward.fail_penalty

        self.trace.append(
            {
                "step": report.step,
                "tranche": self.tranche,
                "subgoal": w.subgoal.id if w.subgoal is not None else 0,
                "action": action.name.lower(),
                "fills": [[f.price, f.volume, f.kind.value] for f in fills],
                "reward_i": reward,
                "reward_e": None,
            }
        )
        return self.intrinsic_state(), reward, done

    def end_subgoal(self) -> Tuple[float, ExtrinsicState]:
        """Close the terminated window and compute the extrinsic reward.

        A fulfilled mini-tranche earns its VWAP slippage against the
        market VWAP over the window. A failed one earns the penalty if
        the Meta Trader is blamed, and 0 otherwise. If the tranche
        deadline has been reached with quota outstanding, the outstanding
        quota is liquidated and the reward is the penalty.

        Returns:
            Extrinsic reward and new extrinsic state.

        Raises:
            NoActiveSubgoal: If no window is active.
            EnvironmentStateError: If the window has not terminated.
        """
        w = self._active()
        if not w.terminated:
            raise EnvironmentStateError("The active window has not terminated.")
        stop = self.sim.step + 1
        if w.liquidated:
            reward = self.reward.fail_penalty if w.blame == Blame.META else 0.0
        else:
            _, vwap = fills_vwap(w.fills)
            market = self.day.market_vwap(w.start + 1, stop)
            if market is None:
                market = self.day.mid(w.start)
            reward = slippage_bp(vwap, market, self.side)

        per_step = self.day.traded_volume(w.start + 1, stop) / max(w.steps, 1)
        self._volume_history.append(per_step)
        mean = float(np.mean(self._volume_history))
        self.last_window_volume = per_step / mean if mean > 0 else 0.0

        deadline = False
        if self.tranche_remaining > 0 and self.tranche_steps_left <= 0:
            left = self.tranche_remaining
            self.sim.liquidate_market(self.side, left)
            self.sim.take_pending()
            self.tranche_filled = self.quota
            reward = self.reward.fail_penalty
            deadline = True
            logger.debug("Tranche %d deadline: liquidated %d shares", self.tranche, left)

        outcome = SubgoalOutcome(
            tranche=w.tranche,
            subgoal=w.subgoal.id if w.subgoal is not None else 0,
            start=w.start,
            steps=w.steps,
            size=w.size,
            liquidated=w.liquidated,
            blame=w.blame,
            reward=reward,
            deadline_missed=deadline,
        )
        self.outcomes.append(outcome)
        logger.debug(
            "Subgoal %d at step %d: %d shares, %d liquidated, blame %s, reward %.3f",
            outcome.subgoal,
            w.start,
            w.size,
            w.liquidated,
            w.blame.value,
            reward,
        )
        if self.trace:
            self.trace[-1]["reward_e"] = reward
        self._window = None
        return reward, self.extrinsic_state()

    @property
    def window_active(self) -> bool:
        return self._window is not None

    def write_trace(self, path: str):
        """Write the step trace as newline-delimited JSON."""
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w") as f:
            for line in self.trace:
                f.write(json.dumps(line) + "\n")
