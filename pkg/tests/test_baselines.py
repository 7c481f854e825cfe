import numpy as np
import pytest

from m3t import (
    Action,
    ExecutionEnv,
    FlatTrader,
    MicroTrader,
    RulePolicyState,
    ap_policy_step,
    flat_agent_episode,
    run_rule_day,
    run_rule_tranche,
    twap_policy_step,
)
from m3t._baselines import flat_window_shares, rule_state, twap_target_lots
from m3t._hmdp import N_FEATURES, WINDOW_ROWS
from m3t._lob import LOT
from m3t._macro import TrancheAllocation


def test_twap_schedule():
    assert twap_target_lots(2400, 300) == 12
    assert twap_target_lots(2400, 0) == 0
    assert twap_target_lots(2400, 600) == 24
    # 13 lots are due at step 301
    on_time = RulePolicyState(quota=2400, filled=1200, elapsed=300, issued=1200)
    assert twap_policy_step(on_time) == Action.PASSIVE
    covered = RulePolicyState(quota=2400, filled=1200, elapsed=300, issued=1300, resting=True)
    assert twap_policy_step(covered) == Action.WAIT
    stale = RulePolicyState(quota=2400, filled=1100, elapsed=300, issued=1200, resting=True)
    assert twap_policy_step(stale) == Action.CROSS
    behind = RulePolicyState(quota=2400, filled=1000, elapsed=300, issued=1000)
    assert twap_policy_step(behind) == Action.CROSS


def test_twap_first_and_empty():
    assert twap_policy_step(RulePolicyState(quota=0, filled=0, elapsed=10)) == Action.WAIT
    assert twap_policy_step(RulePolicyState(quota=2400, filled=0, elapsed=0)) == Action.PASSIVE


@pytest.mark.parametrize("quota", [1000, 15000, 60000])
def test_twap_tracks_schedule_in_simulator(quota, synth_day):
    env = ExecutionEnv(synth_day)
    env.begin_tranche(quota)
    env.begin_window(env.tranche_steps_left, quota)
    lags = []
    done = False
    while not done:
        state = rule_state(env)
        lags.append(twap_target_lots(quota, state.elapsed) - state.issued // LOT)
        _, _, done = env.micro_step(twap_policy_step(state))
    env.end_subgoal()
    assert len(lags) > 500
    assert min(lags) >= 0 and max(lags) <= 1
    assert env.outcomes[-1].liquidated <= LOT
    assert env.tranche_filled == quota


@pytest.mark.parametrize(
    "filled, expected",
    [(3000, Action.CROSS), (5500, Action.PASSIVE), (6500, Action.WAIT)],
)
def test_ap_rule(filled, expected):
    state = RulePolicyState(quota=10000, filled=filled, elapsed=300, issued=filled)
    assert ap_policy_step(state) == expected


def test_ap_resting_waits():
    state = RulePolicyState(quota=10000, filled=5500, elapsed=300, issued=5600, resting=True)
    assert ap_policy_step(state) == Action.WAIT
    assert ap_policy_step(RulePolicyState(quota=0, filled=0, elapsed=300)) == Action.WAIT


def test_rule_state_errors():
    with pytest.raises(ValueError):
        RulePolicyState(quota=100, filled=200, elapsed=0)
    with pytest.raises(ValueError):
        RulePolicyState(quota=100, filled=0, elapsed=601)
    state = RulePolicyState(quota=1000, filled=250, elapsed=150)
    assert (state.time_ratio, state.fill_ratio) == (0.25, 0.25)


def test_twap_crosses_without_trades(build_day):
    env = ExecutionEnv(build_day())
    # two lots are crossed to keep up, the last passive lot is liquidated
    assert run_rule_tranche(env, twap_policy_step, 300) == 100
    assert env.sim.ledger.total_volume == 300
    assert env.tranche_done
    assert not env.outcomes[-1].deadline_missed


def test_zero_quota_tranche(build_day):
    env = ExecutionEnv(build_day())
    assert run_rule_tranche(env, twap_policy_step, 0) == 0
    assert env.outcomes == []


@pytest.mark.parametrize("policy", [twap_policy_step, ap_policy_step])
def test_rule_day_fills(policy, synth_day):
    env = ExecutionEnv(synth_day)
    run_rule_day(env, TrancheAllocation((1000,) * 8), policy)
    assert env.sim.ledger.total_volume == 8000
    assert env.tranche == 7
    assert len(env.outcomes) == 8
    assert env.sim.accounting().balanced


def test_flat_window_shares():
    assert flat_window_shares(15000) == 2500
    assert flat_window_shares(100) == 100
    assert flat_window_shares(1000) == 200


def test_flat_trader_kinds():
    assert FlatTrader("ddqn", backbone="fc", width=8, hidden=8).double
    assert not FlatTrader("dqn", backbone="fc", width=8, hidden=8).double
    with pytest.raises(ValueError):
        FlatTrader("ap")


def test_flat_trader_from_config(tiny_config):
    agent = FlatTrader.from_config(tiny_config, kind="dqn")
    assert agent.kind == "dqn"
    assert agent.online.backbone == tiny_config.micro_backbone


def test_flat_shares_micro_network(rng):
    flat = FlatTrader("ddqn", backbone="fc", width=8, hidden=8, ff_width=8, seed=3)
    micro = MicroTrader("fc", width=8, hidden=8, ff_width=8, seed=3)
    state = (rng.normal(size=(WINDOW_ROWS, N_FEATURES)), np.zeros(9), rng.random(2))
    np.testing.assert_array_equal(flat.q_values(state), micro.q_values(state))


def test_flat_episode_fills(synth_day):
    env = ExecutionEnv(synth_day)
    agent = FlatTrader("ddqn", backbone="fc", width=8, hidden=8, ff_width=8, batch_size=8)
    losses = flat_agent_episode(env, TrancheAllocation((600,) * 8), agent, eps=1.0)
    assert env.sim.ledger.total_volume == 4800
    assert len(losses) > 0
    assert all(np.isfinite(losses))
    assert {o.subgoal for o in env.outcomes} == {0}
