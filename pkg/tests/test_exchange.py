import numpy as np
import pandas as pd
import pytest

from m3t import (
    EmptyBook,
    ExchangeSimulator,
    FillKind,
    NoQuote,
    PriceChoice,
    Side,
    SimulationEnded,
)


def test_crossing_sell_fills_at_bid(build_day):
    sim = ExchangeSimulator(build_day(bid_volumes=(500,) * 5))
    order = sim.issue_order(Side.SELL, PriceChoice.AT_BID1)
    assert order.crossing
    assert order.remaining == 0
    assert sim.order is None
    report = sim.advance_step()
    assert [(f.price, f.volume, f.kind) for f in report.fills] == [
        (1000, 100, FillKind.AGGRESSIVE)
    ]
    assert report.fills[0].step == 0


def test_crossing_partial(build_day):
    sim = ExchangeSimulator(build_day(bid_volumes=(60, 100, 100, 100, 100)))
    order = sim.issue_order(Side.SELL, PriceChoice.AT_BID1)
    assert order.remaining == 40
    assert sim.order is order
    assert sim.accounting().balanced


def test_crossing_buy_fills_at_ask(build_day):
    sim = ExchangeSimulator(build_day())
    sim.issue_order(Side.BUY, PriceChoice.AT_ASK1)
    (fill,) = sim.advance_step().fills
    assert fill.price == 1001


def test_passive_queue_estimate(build_day):
    sim = ExchangeSimulator(build_day(ask_volumes=(600,) * 5))
    order = sim.issue_order(Side.SELL, PriceChoice.AT_ASK1)
    assert order.queue_ahead == 200
    assert order.price == 1001
    assert not order.crossing


def test_iota_divisor(build_day):
    sim = ExchangeSimulator(build_day(), iota=2)
    assert sim.issue_order(Side.SELL, PriceChoice.AT_ASK1).queue_ahead == 300


def test_passive_fill_after_queue(build_day):
    day = build_day(trades=[(1, 1001, 150), (1, 1002, 100)])
    sim = ExchangeSimulator(day)
    order = sim.issue_order(Side.SELL, PriceChoice.AT_ASK1)
    report = sim.advance_step()
    assert [(f.price, f.volume, f.kind) for f in report.fills] == [
        (1001, 50, FillKind.PASSIVE)
    ]
    assert order.remaining == 50
    assert order.queue_ahead == 0
    assert sim.order is order


def test_trades_below_limit_ignored(build_day):
    sim = ExchangeSimulator(build_day(trades=[(1, 1000, 5000)]))
    order = sim.issue_order(Side.SELL, PriceChoice.AT_ASK1)
    assert sim.advance_step().fills == ()
    assert order.queue_ahead == 200


def test_buy_eligibility(build_day):
    sim = ExchangeSimulator(build_day(trades=[(1, 1000, 150), (1, 1001, 500)]))
    order = sim.issue_order(Side.BUY, PriceChoice.AT_BID1)
    report = sim.advance_step()
    assert order.queue_ahead == 50
    assert report.fills == ()


def test_no_order_no_fills(build_day):
    sim = ExchangeSimulator(build_day(trades=[(1, 1001, 5000)]))
    assert sim.advance_step().fills == ()
    assert sim.ledger.total_volume == 0


def test_reissue_cancels(build_day):
    sim = ExchangeSimulator(build_day())
    first = sim.issue_order(Side.SELL, PriceChoice.AT_ASK1)
    second = sim.issue_order(Side.SELL, PriceChoice.AT_ASK1)
    assert sim.order is second and second is not first
    acc = sim.accounting()
    assert acc.issued == 200
    assert acc.returned == 100
    assert acc.resting == 100
    assert acc.balanced
    assert sim.cancel() == 100
    assert sim.cancel() == 0


def test_liquidation_walks_book(build_day):
    sim = ExchangeSimulator(build_day(bid_volumes=(200, 100, 100, 100, 100)))
    fills = sim.liquidate_market(Side.SELL, 300)
    assert [(f.price, f.volume) for f in fills] == [(1000, 200), (999, 100)]
    assert all(f.kind == FillKind.LIQUIDATION for f in fills)
    assert sim.accounting().liquidated == 300


def test_liquidation_beyond_depth(build_day):
    sim = ExchangeSimulator(build_day(bid_volumes=(200, 100, 100, 100, 100)))
    fills = sim.liquidate_market(Side.SELL, 800)
    assert fills[-1].price == 996
    assert fills[-1].volume == 300
    assert sum(f.volume for f in fills) == 800


def test_liquidation_nothing(build_day):
    assert ExchangeSimulator(build_day()).liquidate_market(Side.SELL, 0) == []


def test_empty_book(build_day):
    sim = ExchangeSimulator(build_day(bid_volumes=(0,) * 5))
    with pytest.raises(EmptyBook):
        sim.liquidate_market(Side.SELL, 100)
    with pytest.raises(NoQuote):
        sim.issue_order(Side.SELL, PriceChoice.AT_BID1)
    sim.issue_order(Side.SELL, PriceChoice.AT_ASK1)


def test_simulation_end(build_day):
    sim = ExchangeSimulator(build_day(), start_step=4798)
    sim.advance_step()
    assert sim.step == 4799
    with pytest.raises(SimulationEnded):
        sim.advance_step()
    with pytest.raises(SimulationEnded):
        sim.issue_order(Side.SELL, PriceChoice.AT_ASK1)


def test_market_data_unchanged(synth_day):
    before = synth_day.trade_volumes.copy()
    sim = ExchangeSimulator(synth_day)
    for _ in range(200):
        if sim.order is None:
            sim.issue_order(Side.SELL, PriceChoice.AT_ASK1)
        sim.advance_step()
    np.testing.assert_array_equal(synth_day.trade_volumes, before)


def test_random_policy_conservation(synth_day):
    rng = np.random.default_rng(7)
    sim = ExchangeSimulator(synth_day)
    eligible = 0
    queue = None
    for _ in range(1500):
        action = rng.integers(3)
        if action == 0:
            sim.issue_order(Side.SELL, PriceChoice.AT_ASK1)
            queue = sim.order.queue_ahead
        elif action == 1:
            sim.issue_order(Side.SELL, PriceChoice.AT_BID1)
        order = sim.order
        report = sim.advance_step()
        if order is not None and not order.crossing:
            sl = synth_day.step_trades(report.step)
            prices = synth_day.trade_prices[sl]
            eligible += int(synth_day.trade_volumes[sl][prices >= order.price].sum())
            assert order.queue_ahead <= queue
            queue = order.queue_ahead
        assert sim.accounting().balanced
    passive = sim.ledger.volume(FillKind.PASSIVE)
    assert passive <= eligible
    acc = sim.accounting()
    assert acc.issued == (
        acc.filled_passive + acc.filled_aggressive + acc.returned + acc.resting
    )


def test_ledger_csv(build_day, tmp_path):
    sim = ExchangeSimulator(build_day(trades=[(1, 1001, 400)]))
    sim.issue_order(Side.SELL, PriceChoice.AT_ASK1)
    sim.advance_step()
    sim.issue_order(Side.SELL, PriceChoice.AT_BID1)
    path = tmp_path / "fills.csv"
    sim.ledger.to_csv(str(path))
    frame = pd.read_csv(path)
    assert len(frame) == 2
    assert frame["volume"].sum() == 200
    assert sim.ledger.vwap() == pytest.approx(1000.5)
