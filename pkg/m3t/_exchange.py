# -*- coding: utf-8 -*-
# Copyright (C) 2025 by the m3t developers
# All rights reserved. BSD 3-clause License.
# This file is part of the m3t package. Details of the copyright
# and user license can be found in the 'LICENSE' file distributed
# with the package.

"""Replay-driven execution simulator."""

import logging
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from ._errors import EmptyBook, NoQuote, SimulationEnded
from ._lob import LOT, LobSnapshot, TradingDay

logger = logging.getLogger(__name__)

#: Default queue length estimator divisor.
IOTA = 3


class Side(IntEnum):
    """Order direction, with the sign used in slippage."""

    BUY = -1
    SELL = 1


class PriceChoice(Enum):
    """Limit price of a child order."""

    AT_BID1 = "at_bid1"
    AT_ASK1 = "at_ask1"


class FillKind(Enum):
    """How a fill was obtained."""

    PASSIVE = "passive"
    AGGRESSIVE = "aggressive"
    LIQUIDATION = "liquidation"


@dataclass(frozen=True)
class Fill:
    """One execution of (part of) our order.

    Args:
        step: Simulation step of the fill.
        price: Fill price in ticks.
        volume: Filled shares.
        kind: Fill kind.
    """

    step: int
    price: int
    volume: int
    kind: FillKind


@dataclass
class ChildOrder:
    """The single resting child order.

    Args:
        side: Order direction.
        price: Limit price in ticks.
        size: Order size in shares.
        queue_ahead: Estimated shares ahead in the queue.
        issued_step: Step at which the order was issued.
        remaining: Unfilled shares.
        crossing: ``True`` if the order was priced through the touch.
    """

    side: Side
    price: int
    size: int
    queue_ahead: int
    issued_step: int
    remaining: int = field(default=-1)
    crossing: bool = False

    def __post_init__(self):
        if self.remaining < 0:
            self.remaining = self.size

    def eligible(self, trade_price: int) -> bool:
        """Whether a market trade at `trade_price` advances this order."""
        if self.side == Side.SELL:
            return trade_price >= self.price
        return trade_price <= self.price


class FillLedger:
    """Audit trail of fills."""

    def __init__(self):
        self.fills: List[Fill] = []
        self.total_volume = 0
        self.total_value = 0

    def __len__(self) -> int:
        return len(self.fills)

    def add(self, fill: Fill):
        if fill.volume <= 0:
            raise ValueError("Fill volume must be positive.")
        self.fills.append(fill)
        self.total_volume += fill.volume
        self.total_value += fill.price * fill.volume

    def volume(self, kind: Optional[FillKind] = None) -> int:
        """Total filled volume, optionally of a single kind."""
        if kind is None:
            return self.total_volume
        return sum(f.volume for f in self.fills if f.kind == kind)

    def vwap(self) -> Optional[float]:
        """VWAP of all fills in ticks, or ``None`` if there are none."""
        if self.total_volume == 0:
            return None
        return self.total_value / self.total_volume

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(f.step, f.price, f.volume, f.kind.value) for f in self.fills],
            columns=["step", "price", "volume", "kind"],
        )

    def to_csv(self, path: str):
        """Export the ledger as CSV ``step,price,volume,kind``."""
        self.to_frame().to_csv(path, index=False, lineterminator="\n")


def fills_vwap(fills) -> Tuple[int, Optional[float]]:
    """Volume and VWAP (ticks) of a sequence of fills."""
    vol = sum(f.volume for f in fills)
    if vol == 0:
        return 0, None
    return vol, sum(f.price * f.volume for f in fills) / vol


@dataclass(frozen=True)
class StepReport:
    """Outcome of one simulation step.

    Args:
        step: New step index.
        fills: Fills since the previous step, including immediate fills
           of an order issued during the previous step.
        snapshot: Snapshot at the new step.
    """

    step: int
    fills: Tuple[Fill, ...]
    snapshot: LobSnapshot


@dataclass(frozen=True)
class Accounting:
    """Share conservation counters of a simulator.

    ``issued == filled_passive + filled_aggressive + returned + resting``
    always holds; liquidation volume is counted separately.
    """

    issued: int
    filled_passive: int
    filled_aggressive: int
    returned: int
    resting: int
    liquidated: int

    @property
    def balanced(self) -> bool:
        return self.issued == (
            self.filled_passive + self.filled_aggressive + self.returned + self.resting
        )


class SimClock:
    """Position of the simulator in a trading day.

    Args:
        day: Trading day.
        step: Initial step.
    """

    def __init__(self, day: TradingDay, step: int = 0):
        self.day = day
        self.step = step

    @property
    def ended(self) -> bool:
        return self.step >= self.day.n_snapshots - 1

    def tick(self) -> int:
        if self.ended:
            raise SimulationEnded(f"Day {self.day.day_id} has no further snapshots.")
        self.step += 1
        return self.step

    def snapshot(self) -> LobSnapshot:
        return self.day.snapshot(self.step)

    def trade_slice(self) -> slice:
        """Trades with timestamp in (previous snapshot, current snapshot]."""
        return self.day.step_trades(self.step)


class ExchangeSimulator:
    """Execution simulator replaying one trading day.

    At most one child order rests at any time; issuing a new order
    cancels the old one. A crossing order fills immediately against the
    displayed opposite level 1 volume. A passive order joins the tail of
    its queue with an estimated :code:`displayed volume // iota` shares
    ahead, advances when market trades print at or through its price,
    and fills from the eligible trade volume left over once the queue
    ahead is exhausted. Market data are never modified.

    Args:
        day: Trading day to replay.
        iota: Queue length estimator divisor.
        start_step: Initial step.
    """

    def __init__(self, day: TradingDay, iota: int = IOTA, start_step: int = 0):
        self.day = day
        self.iota = iota
        self.clock = SimClock(day, start_step)
        self.order: Optional[ChildOrder] = None
        self.ledger = FillLedger()
        self._pending: List[Fill] = []
        self._issued = 0
        self._returned = 0
        self._liquidated = 0

    @property
    def step(self) -> int:
        return self.clock.step

    def _book(self, side: Side, t: int) -> Tuple[np.ndarray, np.ndarray]:
        """Prices and volumes of the bid (``BUY``) or ask (``SELL``) side."""
        if side == Side.BUY:
            return self.day.bid_prices[t], self.day.bid_volumes[t]
        return self.day.ask_prices[t], self.day.ask_volumes[t]

    def _record(self, fill: Fill):
        self.ledger.add(fill)
        self._pending.append(fill)

    def cancel(self) -> int:
        """Cancel the resting order.

        Returns:
            Unfilled shares returned to the remaining quota.
        """
        if self.order is None:
            return 0
        returned = self.order.remaining
        self._returned += returned
        self.order = None
        return returned

    def issue_order(
        self, side: Side, price_choice: PriceChoice, size: int = LOT
    ) -> ChildOrder:
        """Issue a child order at the current step.

        Args:
            side: Order direction.
            price_choice: Price at the current bid1 or ask1.
            size: Order size in shares.

        Returns:
            The new order (already partially or fully filled if crossing).

        Raises:
            NoQuote: If the book side setting the price is empty.
            SimulationEnded: If the day has no further steps.
        """
        if self.clock.ended:
            raise SimulationEnded(f"Day {self.day.day_id} has ended.")
        t = self.clock.step
        if price_choice == PriceChoice.AT_BID1:
            prices, volumes = self._book(Side.BUY, t)
        else:
            prices, volumes = self._book(Side.SELL, t)
        if volumes[0] <= 0:
            raise NoQuote(f"Empty {price_choice.value} at step {t} of {self.day.day_id}.")
        price = int(prices[0])
        crossing = (side == Side.SELL) == (price_choice == PriceChoice.AT_BID1)

        self.cancel()
        self._issued += size
        if crossing:
            order = ChildOrder(side, price, size, 0, t, crossing=True)
            fill = min(size, int(volumes[0]))
            self._record(Fill(t, price, fill, FillKind.AGGRESSIVE))
            order.remaining -= fill
        else:
            order = ChildOrder(side, price, size, int(volumes[0]) // self.iota, t)
        self.order = order if order.remaining > 0 else None
        return order

    def _match_trades(self) -> List[Fill]:
        order = self.order
        t = self.clock.step
        sl = self.clock.trade_slice()
        fills = []
        for price, volume in zip(self.day.trade_prices[sl], self.day.trade_volumes[sl]):
            if not order.eligible(int(price)):
                continue
            volume = int(volume)
            ahead = min(order.queue_ahead, volume)
            order.queue_ahead -= ahead
            fill = min(volume - ahead, order.remaining)
            if fill > 0:
                order.remaining -= fill
                fills.append(Fill(t, order.price, fill, FillKind.PASSIVE))
            if order.remaining == 0:
                break
        return fills

    def advance_step(self) -> StepReport:
        """Advance one step and match the resting order against trades.

        Returns:
            Step report with the fills since the previous step.

        Raises:
            SimulationEnded: If the day has no further snapshots.
        """
        self.clock.tick()
        if self.order is not None:
            for fill in self._match_trades():
                self._record(fill)
            if self.order.remaining == 0:
                self.order = None
        report = StepReport(self.clock.step, tuple(self._pending), self.clock.snapshot())
        self._pending = []
        return report

    def liquidate_market(self, side: Side, remaining: int) -> List[Fill]:
        """Execute `remaining` shares as a market order.

        Walks the opposite book from level 1 outward at displayed volume;
        any residue beyond displayed depth fills at the deepest displayed
        level.

        Args:
            side: Order direction.
            remaining: Shares to execute.

        Returns:
            Liquidation fills.

        Raises:
            EmptyBook: If the opposite book displays no volume.
        """
        if remaining <= 0:
            return []
        t = self.clock.step
        opposite = Side.BUY if side == Side.SELL else Side.SELL
        prices, volumes = self._book(opposite, t)
        live = volumes > 0
        if not live.any():
            raise EmptyBook(f"No displayed depth at step {t} of {self.day.day_id}.")
        fills = []
        left = remaining
        for price, volume in zip(prices[live], volumes[live]):
            take = min(left, int(volume))
            fills.append(Fill(t, int(price), take, FillKind.LIQUIDATION))
            left -= take
            if left == 0:
                break
        if left > 0:
            logger.debug("Liquidating %d shares beyond displayed depth", left)
            last = fills[-1]
            fills[-1] = Fill(t, last.price, last.volume + left, FillKind.LIQUIDATION)
        for fill in fills:
            self._record(fill)
        self._liquidated += remaining
        return fills

    def take_pending(self) -> Tuple[Fill, ...]:
        """Return and clear fills not yet reported by :meth:`advance_step`."""
        pending, self._pending = tuple(self._pending), []
        return pending

    def accounting(self) -> Accounting:
        return Accounting(
            issued=self._issued,
            filled_passive=self.ledger.volume(FillKind.PASSIVE),
            filled_aggressive=self.ledger.volume(FillKind.AGGRESSIVE),
            returned=self._returned,
            resting=0 if self.order is None else self.order.remaining,
            liquidated=self._liquidated,
        )
