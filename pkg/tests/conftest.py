import matplotlib

matplotlib.use("Agg")

import numpy as np
import pytest

from m3t import LEVELS, ExperimentConfig, SynthParams, TradingDay, generate_synthetic_days
from m3t._harness import MarketData
from m3t._lob import SNAPSHOT_INTERVAL_MS, STEPS_PER_DAY

SMALL_PARAMS = SynthParams(avg_daily_volume=200_000)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="need --runslow option to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def make_day(
    trades=(),
    bid1=1000,
    spread=1,
    bid_volumes=(600,) * LEVELS,
    ask_volumes=(600,) * LEVELS,
    n=STEPS_PER_DAY,
    day_id="hand",
):
    """Constant book day with trades given as (step, price, volume)."""
    depth = np.arange(LEVELS)
    trades = sorted(trades, key=lambda t: t[0])
    steps = np.array([t[0] for t in trades], dtype=np.int64)
    return TradingDay(
        day_id=day_id,
        timestamps=np.arange(n) * SNAPSHOT_INTERVAL_MS,
        bid_prices=np.tile(bid1 - depth, (n, 1)),
        bid_volumes=np.tile(np.array(bid_volumes), (n, 1)),
        ask_prices=np.tile(bid1 + spread + depth, (n, 1)),
        ask_volumes=np.tile(np.array(ask_volumes), (n, 1)),
        trade_timestamps=steps * SNAPSHOT_INTERVAL_MS,
        trade_prices=np.array([t[1] for t in trades], dtype=np.int64),
        trade_volumes=np.array([t[2] for t in trades], dtype=np.int64),
    )


@pytest.fixture
def build_day():
    return make_day


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def synth_days():
    return generate_synthetic_days(11, SMALL_PARAMS, 24)


@pytest.fixture(scope="session")
def synth_day(synth_days):
    return synth_days[20]


@pytest.fixture(scope="session")
def market(synth_days):
    return MarketData(list(synth_days[:20]), list(synth_days[20:]))


@pytest.fixture
def tiny_config(tmp_path):
    return ExperimentConfig(
        episodes=1,
        batch_size=8,
        replay_capacity=200,
        hidden=8,
        model_width=8,
        ff_width=8,
        micro_backbone="fc",
        macro_estimator="ma",
        macro_epochs=2,
        checkpoint_every=1,
        output_dir=str(tmp_path / "out"),
    )
