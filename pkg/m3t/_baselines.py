# -*- coding: utf-8 -*-
# Copyright (C) 2025 by the m3t developers
# All rights reserved. BSD 3-clause License.
# This file is part of the m3t package. Details of the copyright
# and user license can be found in the 'LICENSE' file distributed
# with the package.

"""Rule-based execution strategies and flat deep Q-learning agents."""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional

from ._hmdp import Action, ExecutionEnv, round_to_lot
from ._lob import LOT, STEPS_PER_TRANCHE
from ._macro import TrancheAllocation
from ._micro import MicroTrader, execute_window

logger = logging.getLogger(__name__)

#: Band above the time ratio within which the AP rule keeps quoting.
AP_BAND = 0.10
#: Steps per flat agent execution window.
FLAT_WINDOW_STEPS = 100
#: Execution windows per tranche quota for flat agents.
FLAT_WINDOWS_PER_TRANCHE = 6


@dataclass(frozen=True)
class RulePolicyState:
    """Tranche progress seen by a rule policy.

    Args:
        quota: Tranche quota in shares.
        filled: Filled shares.
        elapsed: Steps since the start of the tranche.
        issued: Shares filled or resting in the book.
        resting: Whether an order is resting.
    """

    quota: int
    filled: int
    elapsed: int
    issued: int = 0
    resting: bool = False

    def __post_init__(self):
        if not 0 <= self.filled <= self.quota:
            raise ValueError(f"Filled {self.filled} outside [0, {self.quota}].")
        if not 0 <= self.elapsed <= STEPS_PER_TRANCHE:
            raise ValueError(f"Elapsed steps {self.elapsed} outside [0, {STEPS_PER_TRANCHE}].")

    @property
    def time_ratio(self) -> float:
        return self.elapsed / STEPS_PER_TRANCHE

    @property
    def fill_ratio(self) -> float:
        return self.filled / self.quota if self.quota else 1.0

    @property
    def stopped(self) -> bool:
        """Whether the AP rule has stopped issuing orders."""
        return self.fill_ratio > self.time_ratio + AP_BAND


def twap_target_lots(quota: int, elapsed: int) -> int:
    """Lots due by `elapsed` steps under an even schedule."""
    return math.ceil((quota // LOT) * elapsed / STEPS_PER_TRANCHE)


def twap_policy_step(state: RulePolicyState) -> Action:
    """Even time schedule with passive quotes.

    Issued lots (filled or resting) are kept within one lot of the
    schedule due at the next step. A passive lot is quoted when exactly
    one lot is missing and nothing rests. A resting lot that no longer
    covers the schedule is replaced by a crossing lot, so that the book
    is clear to issue again on the next step, and a larger deficit is
    crossed. The bound holds while the schedule grows by at most one lot
    per step, that is for tranche quotas of up to 600 lots.
    """
    if state.quota == 0:
        return Action.WAIT
    issued = state.issued // LOT
    due = twap_target_lots(state.quota, min(state.elapsed + 1, STEPS_PER_TRANCHE))
    if issued >= due:
        return Action.WAIT
    if issued == due - 1 and not state.resting:
        return Action.PASSIVE
    return Action.CROSS


def ap_policy_step(state: RulePolicyState) -> Action:
    """Arrival price rule.

    Cross the spread when the filled ratio lags the time ratio, quote
    passively while it leads by at most :data:`AP_BAND`, and stop
    issuing beyond that.
    """
    if state.quota == 0:
        return Action.WAIT
    if state.fill_ratio < state.time_ratio:
        return Action.CROSS
    if state.stopped or state.resting:
        return Action.WAIT
    return Action.PASSIVE


RULES = {"vwap": twap_policy_step, "ap": ap_policy_step}


def rule_state(env: ExecutionEnv) -> RulePolicyState:
    """Current tranche progress of an environment."""
    order = env.sim.order
    resting = 0 if order is None else order.remaining
    return RulePolicyState(
        quota=env.quota,
        filled=env.tranche_filled,
        elapsed=env.sim.step - env.tranche_start,
        issued=env.tranche_filled + resting,
        resting=order is not None,
    )


def run_rule_tranche(
    env: ExecutionEnv, policy: Callable[[RulePolicyState], Action], quota: int
) -> int:
    """Execute one tranche with a rule policy.

    The whole tranche is a single execution window; whatever is unfilled
    when it ends is liquidated.

    Returns:
        Shares liquidated at the end of the tranche.
    """
    env.begin_tranche(quota)
    if env.tranche_done:
        return 0
    env.begin_window(env.tranche_steps_left, quota)
    done = False
    while not done:
        _, _, done = env.micro_step(policy(rule_state(env)))
    env.end_subgoal()
    return env.outcomes[-1].liquidated


def run_rule_day(
    env: ExecutionEnv,
    allocation: TrancheAllocation,
    policy: Callable[[RulePolicyState], Action],
):
    """Execute a full day of tranches with a rule policy."""
    env.reset()
    for quota in allocation.shares:
        run_rule_tranche(env, policy, quota)


def flat_window_shares(quota: int) -> int:
    """Shares per flat agent execution window for a tranche quota."""
    return max(round_to_lot(quota / FLAT_WINDOWS_PER_TRANCHE), LOT)


class FlatTrader(MicroTrader):
    """Micro Trader network driven by a fixed window schedule.

    The subgoal input is always zero. `kind` selects double (``"ddqn"``)
    or standard (``"dqn"``) Q-learning targets.
    """

    def __init__(self, kind: str = "ddqn", **kwargs):
        if kind not in ("dqn", "ddqn"):
            raise ValueError(f"Unknown flat agent {kind!r}.")
        kwargs["double"] = kind == "ddqn"
        super().__init__(**kwargs)
        self.kind = kind

    @classmethod
    def from_config(cls, config, seed: Optional[int] = None, kind: Optional[str] = None) -> "FlatTrader":
        return cls(
            kind=config.agent if kind is None else kind,
            backbone=config.micro_backbone,
            width=config.model_width,
            hidden=config.hidden,
            ff_width=config.ff_width,
            seed=config.seed if seed is None else seed,
            gamma=config.gamma,
            lr=config.lr,
            capacity=config.replay_capacity,
            batch_size=config.batch_size,
            target_sync=config.target_sync,
        )


def flat_agent_episode(
    env: ExecutionEnv,
    allocation: TrancheAllocation,
    agent: FlatTrader,
    eps: float = 0.0,
    learn: bool = True,
    learn_every: int = 4,
) -> List[float]:
    """Execute (and optionally learn from) one day with a flat agent.

    Each tranche is executed in windows of :data:`FLAT_WINDOW_STEPS`
    steps, each targeting a sixth of the tranche quota.

    Returns:
        Losses of the gradient updates made.
    """
    env.reset()
    losses: List[float] = []
    for quota in allocation.shares:
        env.begin_tranche(quota)
        shares = flat_window_shares(quota)
        while not env.tranche_done:
            state = env.begin_window(FLAT_WINDOW_STEPS, shares)
            _, window_losses = execute_window(env, state, agent, eps, learn, learn_every)
            losses.extend(window_losses)
            env.end_subgoal()
    return losses
