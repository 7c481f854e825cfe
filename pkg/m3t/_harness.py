# -*- coding: utf-8 -*-
# Copyright (C) 2025 by the m3t developers
# All rights reserved. BSD 3-clause License.
# This file is part of the m3t package. Details of the copyright
# and user license can be found in the 'LICENSE' file distributed
# with the package.

"""Training and backtest orchestration."""

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ._baselines import RULES, FlatTrader, flat_agent_episode, run_rule_day
from ._config import ExperimentConfig
from ._errors import CheckpointMissing, ConfigInvalid, DataMissing
from ._exchange import Side
from ._hmdp import SUBGOALS, ExecutionEnv, RewardConfig, slippage_bp
from ._lob import (
    LOT,
    N_TRANCHES,
    TradingDay,
    compute_profile,
    generate_synthetic_days,
    load_replay_dir,
    load_synth_params,
)
from ._macro import (
    HISTORY_DAYS,
    LstmEstimator,
    MovingAverageEstimator,
    ProfileHistory,
    TrancheAllocation,
    allocate,
    build_dataset,
    forecast,
    load_estimator,
    save_estimator,
    train_estimator,
    write_mse_report,
)
from ._meta import MetaTrader
from ._micro import MicroTrader, execute_window
from ._nn import Module
from ._rl import EpsilonSchedule

logger = logging.getLogger(__name__)

#: Absolute daily slippage (bp) treated as a simulator fault.
SLIPPAGE_ALARM_BP = 500.0

CURVE_COLUMNS = ["episode", "epsilon", "meta_loss", "micro_loss", "slippage_bp"]

#: A strategy executes a full day of tranches in an environment.
Strategy = Callable[[ExecutionEnv, TrancheAllocation], None]


# Data


@dataclass(repr=False)
class MarketData:
    """Trading days of an experiment.

    Args:
        history: Days used only as volume profile history.
        days: Dataset days, chronologically ordered.
        profiles: Volume profiles of `history` followed by `days`.
    """

    history: List[TradingDay]
    days: List[TradingDay]
    profiles: np.ndarray = field(init=False)

    def __post_init__(self):
        self.profiles = np.array(
            [compute_profile(d).as_array() for d in self.history + self.days]
        )

    @property
    def day_ids(self) -> List[str]:
        return [d.day_id for d in self.history + self.days]

    def profile_history(self, day: int) -> ProfileHistory:
        """Profiles of the days preceding dataset day `day`."""
        index = len(self.history) + day
        return ProfileHistory(self.profiles[:index])

    def split(self, train_fraction: float) -> Tuple[List[int], List[int]]:
        """Chronological train and test dataset day indices."""
        n_train = int(round(train_fraction * len(self.days)))
        n_train = min(max(n_train, 1), len(self.days) - 1)
        return list(range(n_train)), list(range(n_train, len(self.days)))


def load_market_data(config: ExperimentConfig) -> MarketData:
    """Load or generate the days of an experiment.

    Raises:
        ConfigInvalid: If fewer history days than a profile forecast
           needs are configured.
        DataMissing: If too few usable days are available.
    """
    if config.history_days < HISTORY_DAYS:
        raise ConfigInvalid(
            f"history_days must be at least {HISTORY_DAYS}, got {config.history_days}."
        )
    if config.data_dir is not None:
        days = load_replay_dir(config.data_dir)
    else:
        params = load_synth_params(config.synth_params) if config.synth_params else None
        days = generate_synthetic_days(
            config.synth_seed, params, config.history_days + config.n_days
        )
    if len(days) < config.history_days + 2:
        raise DataMissing(
            f"Need {config.history_days} history days and two dataset days, "
            f"found {len(days)} days."
        )
    data = MarketData(days[: config.history_days], days[config.history_days :])
    logger.info(
        "Loaded %d history days and %d dataset days", len(data.history), len(data.days)
    )
    return data


def audit_split(train: Sequence[TradingDay], test: Sequence[TradingDay]):
    """Check that no day is used for both training and testing.

    Raises:
        ConfigInvalid: If the day sets overlap.
    """
    shared = {d.day_id for d in train} & {d.day_id for d in test}
    if shared:
        raise ConfigInvalid(f"Days used for training and testing: {sorted(shared)}.")


# Metrics


def full_day_vwap(day: TradingDay) -> float:
    vwap = day.market_vwap(0, day.n_snapshots)
    return vwap if vwap is not None else day.mid(0)


def daily_slippage(env: ExecutionEnv) -> float:
    """Slippage (bp) of all fills of a day against the day's market VWAP."""
    vwap = env.sim.ledger.vwap()
    if vwap is None:
        return 0.0
    return slippage_bp(vwap, full_day_vwap(env.day), env.side)


def subgoal_counts(env: ExecutionEnv) -> np.ndarray:
    """Counts of selected subgoals, shape (tranches, subgoals)."""
    counts = np.zeros((N_TRANCHES, len(SUBGOALS)), dtype=int)
    for outcome in env.outcomes:
        if outcome.subgoal:
            counts[outcome.tranche, outcome.subgoal - 1] += 1
    return counts


@dataclass(frozen=True)
class DayResult:
    """Backtest result of one day.

    Args:
        day_id: Day identifier.
        slippage_bp: VWAP slippage against the full-day market VWAP.
        parent: Parent order in shares.
        filled: Filled shares.
        liquidated: Shares executed by forced liquidation.
        counts: Subgoal counts per tranche.
    """

    day_id: str
    slippage_bp: float
    parent: int
    filled: int
    liquidated: int
    counts: Tuple[Tuple[int, ...], ...]

    @property
    def fill_rate(self) -> float:
        return self.filled / self.parent if self.parent else 1.0


@dataclass(repr=False)
class BacktestReport:
    """Backtest results of one strategy on one dataset.

    Args:
        strategy: Strategy label.
        dataset: Dataset (stock) name.
        days: Per-day results in day order.
    """

    strategy: str
    dataset: str
    days: List[DayResult] = field(default_factory=list)

    @property
    def slippages(self) -> np.ndarray:
        return np.array([d.slippage_bp for d in self.days])

    @property
    def mean(self) -> float:
        return float(self.slippages.mean()) if self.days else float("nan")

    @property
    def std(self) -> float:
        """Standard deviation over days."""
        return float(self.slippages.std()) if self.days else float("nan")

    @property
    def counts(self) -> np.ndarray:
        """Subgoal counts per tranche summed over days."""
        total = np.zeros((N_TRANCHES, len(SUBGOALS)), dtype=int)
        for d in self.days:
            total += np.array(d.counts, dtype=int)
        return total

    @property
    def filled(self) -> int:
        return sum(d.filled for d in self.days)

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "dataset": self.dataset,
            "days": [asdict(d) for d in self.days],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BacktestReport":
        days = [
            DayResult(**{**d, "counts": tuple(tuple(row) for row in d["counts"])})
            for d in data["days"]
        ]
        return cls(data["strategy"], data["dataset"], days)

    def save(self, path: str):
        """Write the report as JSON."""
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1, sort_keys=True)
            f.write("\n")


def load_backtest(path: str) -> BacktestReport:
    with open(path) as f:
        return BacktestReport.from_dict(json.load(f))


# Agents


def strategy_label(config: ExperimentConfig) -> str:
    """Report label ``<agent>`` or ``<agent>@<backbone>`` of a configuration."""
    label = config.agent
    if config.agent == "m3t" and config.rl_backbone != "ddqn":
        label += "@" + config.rl_backbone
    if config.agent in ("m3t", "dqn", "ddqn") and config.micro_backbone != "mhsa":
        label += "@" + config.micro_backbone
    if config.agent != "m3t" and config.macro_estimator != "lstm":
        label += "@" + config.macro_estimator
    return label


def checkpoint_paths(config: ExperimentConfig, directory: Optional[str] = None) -> Dict[str, str]:
    directory = config.output_dir if directory is None else directory
    label = strategy_label(config)
    if config.agent == "m3t":
        return {
            "meta": os.path.join(directory, f"{label}.meta.npz"),
            "micro": os.path.join(directory, f"{label}.micro.npz"),
        }
    return {"micro": os.path.join(directory, f"{label}.micro.npz")}


def macro_checkpoint_path(config: ExperimentConfig) -> str:
    if config.macro_checkpoint is not None:
        return config.macro_checkpoint
    return os.path.join(config.output_dir, "macro_lstm.npz")


def profile_estimator(config: ExperimentConfig) -> Module:
    """Volume profile estimator used for tranche allocation.

    An untrained LSTM estimator, which forecasts the moving average, is
    used if no trained checkpoint is available.
    """
    if config.macro_estimator == "ma":
        return MovingAverageEstimator()
    path = macro_checkpoint_path(config)
    if os.path.exists(path):
        return load_estimator(path)
    logger.warning("No profile estimator checkpoint at %s; allocating by moving average", path)
    return LstmEstimator(rng=np.random.default_rng(config.seed))


def day_allocation(
    data: MarketData, day: int, estimator: Module, parent: int
) -> TrancheAllocation:
    """Allocate the parent order of dataset day `day`."""
    return allocate(parent, forecast(data.profile_history(day), estimator, HISTORY_DAYS))


def sample_tranche_quota(rng: np.random.Generator, config: ExperimentConfig) -> int:
    """Random training tranche quota in shares, uniform over whole lots."""
    low = math.ceil(config.tranche_min / config.tranche_divisor / LOT)
    high = max(math.floor(config.tranche_max / config.tranche_divisor / LOT), low)
    return int(rng.integers(low, high + 1)) * LOT


def sample_training_allocation(
    rng: np.random.Generator, config: ExperimentConfig
) -> TrancheAllocation:
    return TrancheAllocation(tuple(sample_tranche_quota(rng, config) for _ in range(N_TRANCHES)))


@dataclass
class DayStats:
    """Losses of one executed day."""

    meta_losses: List[float] = field(default_factory=list)
    micro_losses: List[float] = field(default_factory=list)


def run_m3t_day(
    env: ExecutionEnv,
    allocation: TrancheAllocation,
    meta: MetaTrader,
    micro: MicroTrader,
    eps: float = 0.0,
    learn: bool = False,
    learn_every: int = 4,
) -> DayStats:
    """Execute one day with the Meta and Micro Traders.

    For each tranche the Meta Trader selects subgoals until the tranche
    quota is filled, and the Micro Trader executes each mini-tranche.
    """
    env.reset()
    stats = DayStats()
    for quota in allocation.shares:
        ext = env.begin_tranche(quota)
        while not env.tranche_done:
            subgoal = meta.select_subgoal(ext, eps)
            state = env.begin_subgoal(subgoal)
            start = env.sim.step
            _, losses = execute_window(env, state, micro, eps, learn, learn_every)
            stats.micro_losses.extend(losses)
            reward, next_ext = env.end_subgoal()
            if learn:
                meta.observe_subgoal(
                    ext, subgoal, reward, next_ext, env.tranche_done, env.sim.step - start
                )
                loss = meta.learn()
                if loss is not None:
                    stats.meta_losses.append(loss)
            ext = next_ext
    return stats


def make_environment(day: TradingDay, config: ExperimentConfig) -> ExecutionEnv:
    return ExecutionEnv(day, Side(config.side), RewardConfig.from_config(config), config.iota)


def _agents(config: ExperimentConfig):
    if config.agent == "m3t":
        return {"meta": MetaTrader.from_config(config), "micro": MicroTrader.from_config(config)}
    if config.agent in ("dqn", "ddqn"):
        return {"micro": FlatTrader.from_config(config)}
    raise ConfigInvalid(f"Agent {config.agent!r} is a rule and has no trainable parameters.")


def _mean(values: Sequence[float]) -> float:
    return float(np.mean(values)) if values else float("nan")


@dataclass(repr=False)
class TrainingResult:
    """Outcome of :func:`run_training`.

    Args:
        curve: Learning curve with columns :data:`CURVE_COLUMNS`.
        checkpoints: Checkpoint paths keyed by agent.
        train_day_ids: Days the agents were trained on.
    """

    curve: pd.DataFrame
    checkpoints: Dict[str, str]
    train_day_ids: List[str]


def run_training(config: ExperimentConfig, data: Optional[MarketData] = None) -> TrainingResult:
    """Train the agents selected by `config` on the training days.

    One episode executes one training day (cycling through the training
    days) with randomly sized tranches. Checkpoints are written every
    ``checkpoint_every`` episodes and at the end, and the learning curve
    is written as CSV to the output directory.

    Raises:
        DataMissing: If no data are available.
        ConfigInvalid: If the agent has nothing to train.
    """
    data = load_market_data(config) if data is None else data
    agents = _agents(config)
    train_idx, test_idx = data.split(config.train_fraction)
    train_days = [data.days[k] for k in train_idx]
    audit_split(train_days, [data.days[k] for k in test_idx])
    schedule = EpsilonSchedule.from_config(config)
    rng = np.random.default_rng(config.seed)
    paths = checkpoint_paths(config)
    envs: Dict[str, ExecutionEnv] = {}
    rows = []
    for episode in range(config.episodes):
        day = train_days[episode % len(train_days)]
        env = envs.get(day.day_id)
        if env is None:
            env = envs[day.day_id] = make_environment(day, config)
        allocation = sample_training_allocation(rng, config)
        eps = schedule(episode)
        if config.agent == "m3t":
            stats = run_m3t_day(
                env, allocation, agents["meta"], agents["micro"], eps, True, config.learn_every
            )
        else:
            stats = DayStats(
                micro_losses=flat_agent_episode(
                    env, allocation, agents["micro"], eps, True, config.learn_every
                )
            )
        slip = daily_slippage(env)
        rows.append(
            (episode, eps, _mean(stats.meta_losses), _mean(stats.micro_losses), slip)
        )
        logger.info(
            "Episode %d (%s): epsilon %.3f, meta loss %.4g, micro loss %.4g, slippage %.2f bp",
            episode,
            day.day_id,
            eps,
            rows[-1][2],
            rows[-1][3],
            slip,
        )
        if (episode + 1) % config.checkpoint_every == 0 or episode + 1 == config.episodes:
            for name, agent in agents.items():
                agent.save(paths[name])
    curve = pd.DataFrame(rows, columns=CURVE_COLUMNS)
    os.makedirs(config.output_dir, exist_ok=True)
    curve_path = os.path.join(config.output_dir, f"curve_{strategy_label(config)}.csv")
    curve.to_csv(curve_path, index=False, lineterminator="\n")
    logger.info("Wrote learning curve %s", curve_path)
    return TrainingResult(curve, paths, [d.day_id for d in train_days])


def build_strategy(config: ExperimentConfig, checkpoint_dir: Optional[str] = None) -> Strategy:
    """Greedy execution strategy for the agent selected by `config`.

    Raises:
        CheckpointMissing: If a learning agent has no checkpoint.
    """
    if config.agent in RULES:
        policy = RULES[config.agent]
        return lambda env, allocation: run_rule_day(env, allocation, policy)
    agents = _agents(config)
    for name, path in checkpoint_paths(config, checkpoint_dir).items():
        if not os.path.exists(path):
            raise CheckpointMissing(f"No {name} checkpoint at {path}.")
        agents[name].load(path)
    if config.agent == "m3t":
        meta, micro = agents["meta"], agents["micro"]
        return lambda env, allocation: run_m3t_day(env, allocation, meta, micro)
    flat = agents["micro"]
    return lambda env, allocation: flat_agent_episode(env, allocation, flat, 0.0, False)


def run_backtest(
    config: ExperimentConfig,
    checkpoint_dir: Optional[str] = None,
    strategy: Optional[Strategy] = None,
    data: Optional[MarketData] = None,
    trace_dir: Optional[str] = None,
) -> BacktestReport:
    """Execute the parent order on every test day.

    Args:
        config: Experiment configuration.
        checkpoint_dir: Directory of agent checkpoints (default is the
           output directory).
        strategy: Strategy overriding the one selected by `config`.
        data: Market data (loaded from `config` if ``None``).
        trace_dir: If not ``None``, write an ndjson step trace per day.

    Returns:
        Backtest report labelled by strategy and dataset.
    """
    data = load_market_data(config) if data is None else data
    strategy = build_strategy(config, checkpoint_dir) if strategy is None else strategy
    estimator = profile_estimator(config)
    train_idx, test_idx = data.split(config.train_fraction)
    audit_split([data.days[k] for k in train_idx], [data.days[k] for k in test_idx])
    report = BacktestReport(strategy_label(config), config.dataset)
    for k in test_idx:
        day = data.days[k]
        allocation = day_allocation(data, k, estimator, config.parent_shares)
        env = make_environment(day, config)
        strategy(env, allocation)
        slip = daily_slippage(env)
        filled = env.sim.ledger.total_volume
        if filled != allocation.total:
            logger.warning("Day %s filled %d of %d shares", day.day_id, filled, allocation.total)
        if abs(slip) >= SLIPPAGE_ALARM_BP:
            logger.warning("Day %s slippage %.1f bp exceeds alarm level", day.day_id, slip)
        report.days.append(
            DayResult(
                day_id=day.day_id,
                slippage_bp=slip,
                parent=allocation.total,
                filled=filled,
                liquidated=env.sim.accounting().liquidated,
                counts=tuple(tuple(int(c) for c in row) for row in subgoal_counts(env)),
            )
        )
        if trace_dir is not None:
            env.write_trace(os.path.join(trace_dir, f"{report.strategy}.{day.day_id}.ndjson"))
        logger.info("Backtest %s on %s: slippage %.2f bp", report.strategy, day.day_id, slip)
    return report


def run_macro_training(config: ExperimentConfig, data: Optional[MarketData] = None) -> Dict[str, float]:
    """Train and compare the volume profile estimators.

    The LSTM estimator is saved to :func:`macro_checkpoint_path` and the
    test MSE of every estimator is written to ``macro_mse.csv`` in the
    output directory.

    Returns:
        Test MSE (units of 1e-3) keyed by estimator.
    """
    data = load_market_data(config) if data is None else data
    dataset = build_dataset(data.profiles, HISTORY_DAYS)
    scores = {}
    for kind in ("ma", "linear", "mlp", "lstm"):
        result = train_estimator(
            kind, dataset, config.macro_epochs, config.macro_lr, seed=config.seed
        )
        scores[kind] = result.test_mse_e3
        if kind == "lstm":
            save_estimator(macro_checkpoint_path(config), result.estimator)
    os.makedirs(config.output_dir, exist_ok=True)
    write_mse_report(
        os.path.join(config.output_dir, "macro_mse.csv"),
        [(kind, config.dataset, mse) for kind, mse in scores.items()],
    )
    return scores
