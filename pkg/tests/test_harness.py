import logging
import os

import numpy as np
import pandas as pd
import pytest

from conftest import make_day

from m3t import (
    Action,
    BacktestReport,
    CheckpointMissing,
    ConfigInvalid,
    DataMissing,
    DayResult,
    ExecutionEnv,
    ExperimentConfig,
    LstmEstimator,
    MarketData,
    Side,
    Subgoal,
    daily_slippage,
    load_backtest,
    load_market_data,
    run_backtest,
    run_macro_training,
    run_training,
    strategy_label,
    write_day,
)
from m3t._baselines import run_rule_day
from m3t._harness import (
    audit_split,
    build_strategy,
    profile_estimator,
    sample_tranche_quota,
    subgoal_counts,
)


def _trades(price, volume):
    return [(t, price, volume) for t in range(1, 4800)]


def _flat_market(n_days=4):
    history = [make_day(_trades(1000, 1000), day_id=f"h{k:02d}") for k in range(20)]
    days = [make_day(_trades(1000, 1000), day_id=f"d{k}") for k in range(n_days)]
    return MarketData(history, days)


def _cross(state):
    return Action.CROSS


def _one_lot(env):
    env.begin_tranche(100)
    env.begin_subgoal(Subgoal(1))
    env.micro_step(Action.CROSS)
    env.end_subgoal()


def test_daily_slippage_sell(build_day):
    env = ExecutionEnv(build_day(bid1=10010, trades=_trades(10000, 1000)))
    _one_lot(env)
    assert daily_slippage(env) == pytest.approx(10.0)


def test_daily_slippage_buy(build_day):
    env = ExecutionEnv(build_day(bid1=10009, trades=_trades(10000, 1000)), side=Side.BUY)
    _one_lot(env)
    assert daily_slippage(env) == pytest.approx(-10.0)


def test_daily_slippage_no_fills(build_day):
    assert daily_slippage(ExecutionEnv(build_day())) == 0.0


def test_subgoal_counts(build_day):
    env = ExecutionEnv(build_day(trades=_trades(1000, 1000)))
    _one_lot(env)
    counts = subgoal_counts(env)
    assert counts.shape == (8, 9)
    assert counts[0, 0] == 1 and counts.sum() == 1


def test_market_at_vwap_has_zero_slippage(tiny_config):
    data = _flat_market()
    config = tiny_config.override(agent="vwap")
    report = run_backtest(
        config,
        strategy=lambda env, allocation: run_rule_day(env, allocation, _cross),
        data=data,
    )
    assert [d.day_id for d in report.days] == ["d3"]
    (day,) = report.days
    assert day.slippage_bp == pytest.approx(0.0)
    assert day.filled == day.parent == 120000
    assert day.liquidated == 0


def test_report_statistics(tmp_path):
    counts = tuple(tuple(0 for _ in range(9)) for _ in range(8))
    days = [
        DayResult("a", 1.0, 100, 100, 0, counts),
        DayResult("b", 3.0, 100, 100, 0, counts),
    ]
    report = BacktestReport("m3t", "synthetic", days)
    assert report.mean == 2.0
    assert report.std == 1.0
    assert report.filled == 200
    assert report.counts.shape == (8, 9)
    path = str(tmp_path / "reports" / "m3t.json")
    report.save(path)
    loaded = load_backtest(path)
    assert loaded.to_dict() == report.to_dict()
    assert loaded.days[0].fill_rate == 1.0


def test_empty_report():
    report = BacktestReport("vwap", "synthetic")
    assert np.isnan(report.mean) and np.isnan(report.std)


@pytest.mark.parametrize(
    "overrides, label",
    [
        ({}, "m3t"),
        ({"rl_backbone": "dqn"}, "m3t@dqn"),
        ({"micro_backbone": "lstm"}, "m3t@lstm"),
        ({"agent": "dqn"}, "dqn"),
        ({"agent": "ddqn", "micro_backbone": "fc"}, "ddqn@fc"),
        ({"agent": "vwap", "macro_estimator": "ma"}, "vwap@ma"),
        ({"agent": "ap"}, "ap"),
    ],
)
def test_strategy_label(overrides, label):
    assert strategy_label(ExperimentConfig(**overrides)) == label


def test_training_quotas():
    rng = np.random.default_rng(0)
    quotas = [sample_tranche_quota(rng, ExperimentConfig()) for _ in range(1000)]
    assert min(quotas) >= 10000 and max(quotas) <= 20000
    assert all(q % 100 == 0 for q in quotas)
    assert len(set(quotas)) > 50


def test_split_and_audit():
    data = _flat_market()
    train, test = data.split(0.8)
    assert (train, test) == ([0, 1, 2], [3])
    with pytest.raises(ConfigInvalid):
        audit_split(data.days[:2], data.days[1:])
    audit_split(data.days[:2], data.days[2:])


def test_short_history_rejected():
    with pytest.raises(ConfigInvalid):
        load_market_data(ExperimentConfig(history_days=5))


def test_too_few_days(tmp_path):
    for k in range(2):
        day = make_day(_trades(1000, 100))
        write_day(
            day,
            str(tmp_path / f"2024-01-0{k + 1}.snapshots.csv"),
            str(tmp_path / f"2024-01-0{k + 1}.trades.csv"),
        )
    with pytest.raises(DataMissing):
        load_market_data(ExperimentConfig(data_dir=str(tmp_path)))


def test_missing_checkpoints(tiny_config, tmp_path):
    with pytest.raises(CheckpointMissing):
        build_strategy(tiny_config, str(tmp_path / "empty"))
    with pytest.raises(CheckpointMissing):
        build_strategy(tiny_config.override(agent="ddqn"), str(tmp_path / "empty"))


def test_rule_agents_do_not_train(tiny_config, market):
    with pytest.raises(ConfigInvalid):
        run_training(tiny_config.override(agent="vwap"), data=market)


def test_profile_estimator_fallback(tiny_config, caplog):
    config = tiny_config.override(macro_estimator="lstm")
    with caplog.at_level(logging.WARNING):
        estimator = profile_estimator(config)
    assert isinstance(estimator, LstmEstimator)
    assert "No profile estimator checkpoint" in caplog.text


def test_vwap_backtest_fills(tiny_config, market):
    report = run_backtest(tiny_config.override(agent="vwap"), data=market)
    assert report.strategy == "vwap@ma"
    assert len(report.days) == 1
    assert report.days[0].filled == report.days[0].parent == tiny_config.parent_shares
    assert report.counts.sum() == 0


def test_train_and_backtest(tiny_config, market, tmp_path):
    result = run_training(tiny_config, data=market)
    assert list(result.curve.columns) == [
        "episode",
        "epsilon",
        "meta_loss",
        "micro_loss",
        "slippage_bp",
    ]
    assert len(result.curve) == 1
    assert result.train_day_ids == [d.day_id for d in market.days[:3]]
    for path in result.checkpoints.values():
        assert os.path.exists(path)
    curve = pd.read_csv(os.path.join(tiny_config.output_dir, "curve_m3t@fc.csv"))
    assert len(curve) == 1

    report = run_backtest(tiny_config, data=market, trace_dir=str(tmp_path / "trace"))
    (day,) = report.days
    assert day.filled == day.parent == tiny_config.parent_shares
    assert report.counts.sum() > 0
    assert os.path.exists(tmp_path / "trace" / f"m3t@fc.{day.day_id}.ndjson")


def test_flat_agent_train_and_backtest(tiny_config, market):
    config = tiny_config.override(agent="dqn")
    result = run_training(config, data=market)
    assert set(result.checkpoints) == {"micro"}
    report = run_backtest(config, data=market)
    assert report.days[0].filled == report.days[0].parent


@pytest.mark.slow
def test_training_deterministic(tiny_config, market, tmp_path):
    curves, means = [], []
    for k in range(2):
        config = tiny_config.override(episodes=2, output_dir=str(tmp_path / f"run{k}"))
        curves.append(run_training(config, data=market).curve)
        means.append(run_backtest(config, data=market).mean)
    pd.testing.assert_frame_equal(curves[0], curves[1])
    assert means[0] == means[1]


def test_macro_training(tiny_config, market):
    scores = run_macro_training(tiny_config, data=market)
    assert set(scores) == {"ma", "linear", "mlp", "lstm"}
    assert os.path.exists(os.path.join(tiny_config.output_dir, "macro_lstm.npz"))
    frame = pd.read_csv(os.path.join(tiny_config.output_dir, "macro_mse.csv"))
    assert frame["model"].tolist() == ["ma", "linear", "mlp", "lstm"]
    estimator = profile_estimator(tiny_config.override(macro_estimator="lstm"))
    assert isinstance(estimator, LstmEstimator)
