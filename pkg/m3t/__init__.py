# -*- coding: utf-8 -*-
# Copyright (C) 2025 by the m3t developers
# All rights reserved. BSD 3-clause License.
# This file is part of the m3t package. Details of the copyright
# and user license can be found in the 'LICENSE' file distributed
# with the package.

"""Hierarchical reinforcement learning for order execution.

A Macro Trader allocates a parent order to half-hour tranches from
forecast volume profiles, a Meta Trader splits each tranche into
mini-tranches by selecting subgoals, and a Micro Trader places one-lot
child orders in a limit order book replay simulator.
"""

import inspect
import sys
from importlib.metadata import PackageNotFoundError, version

# isort: off

from ._errors import (
    M3TError,
    DataError,
    MissingFile,
    MalformedRow,
    CrossedBook,
    ShortDay,
    InvalidParams,
    ZeroVolumeDay,
    BadHistory,
    EmptyDataset,
    NegativeParent,
    EmptyCounts,
    InvalidSubgoal,
    SimulationError,
    NoQuote,
    SimulationEnded,
    EmptyBook,
    EnvironmentStateError,
    DayExhausted,
    TrancheFilled,
    NoActiveSubgoal,
    NetworkError,
    ShapeMismatch,
    NonFinite,
    AgentError,
    Underfilled,
    ConfigError,
    ConfigInvalid,
    DataMissing,
    CheckpointMissing,
)
from ._config import ExperimentConfig, load_config
from ._lob import (
    LEVELS,
    LOT,
    N_TRANCHES,
    STEPS_PER_TRANCHE,
    LobSnapshot,
    TradeRecord,
    TradingDay,
    VolumeProfile,
    SynthParams,
    load_day,
    write_day,
    load_replay_dir,
    load_synth_params,
    generate_synthetic_day,
    generate_synthetic_days,
    compute_profile,
)
from ._exchange import (
    Side,
    PriceChoice,
    FillKind,
    Fill,
    ChildOrder,
    FillLedger,
    StepReport,
    Accounting,
    SimClock,
    ExchangeSimulator,
)
from ._hmdp import (
    SUBGOALS,
    Subgoal,
    Action,
    Blame,
    RewardConfig,
    ExtrinsicState,
    IntrinsicState,
    SubgoalOutcome,
    ExecutionEnv,
    lob_features,
    round_to_lot,
    slippage_bp,
)
from ._nn import (
    Module,
    Dense,
    Sequential,
    LSTM,
    LayerNorm,
    MultiHeadSelfAttention,
    EncoderBlock,
    MhsaEncoderConfig,
    MhsaEncoder,
    TemporalConv,
    MeanPool,
    Adam,
    mlp,
    fc_forward,
    fc_backward,
    lstm_cell_update,
    lstm_sequence,
    mhsa_encode,
    positional_encoding,
    mse_loss,
    adam_step,
    save_checkpoint,
    load_checkpoint,
    numerical_grad,
)
from ._rl import (
    Transition,
    ReplayBuffer,
    EpsilonSchedule,
    DeepQAgent,
    epsilon,
    ddqn_target,
    dqn_target,
    stack_states,
)
from ._macro import (
    ProfileHistory,
    TrancheAllocation,
    ProfileDataset,
    TrainResult,
    MovingAverageEstimator,
    LinearEstimator,
    MlpEstimator,
    LstmEstimator,
    forecast_ma,
    forecast_lstm,
    forecast,
    make_estimator,
    train_estimator,
    allocate,
    build_dataset,
    chronological_split,
    project_simplex,
    save_estimator,
    load_estimator,
    read_profiles_csv,
    write_profiles_csv,
    write_mse_report,
)
from ._meta import MetaQNetwork, MetaTrader
from ._micro import MicroQNetwork, MicroTrader, execute_window, market_encoder
from ._baselines import (
    RulePolicyState,
    FlatTrader,
    twap_policy_step,
    ap_policy_step,
    run_rule_tranche,
    run_rule_day,
    flat_agent_episode,
)
from ._harness import (
    MarketData,
    DayResult,
    BacktestReport,
    TrainingResult,
    load_market_data,
    run_training,
    run_backtest,
    run_m3t_day,
    run_macro_training,
    daily_slippage,
    load_backtest,
    strategy_label,
)
from ._report import subgoal_speed, tranche_speeds, emit_report
from ._plot import GenericPlot, SubgoalPlot, CurvePlot, plot_subgoals, plot_learning_curve
from ._version import local_version_label


_public_version = "0.1.0.dev1"


def _package_version():
    return _public_version + local_version_label(_public_version)


def _installed_version():
    try:
        ver = version("m3t")
    except PackageNotFoundError:
        ver = _package_version()
    return ver


__version__ = _installed_version()


__all__ = [
    # errors
    "M3TError",
    "DataError",
    "MissingFile",
    "MalformedRow",
    "CrossedBook",
    "ShortDay",
    "InvalidParams",
    "ZeroVolumeDay",
    "BadHistory",
    "EmptyDataset",
    "NegativeParent",
    "EmptyCounts",
    "InvalidSubgoal",
    "SimulationError",
    "NoQuote",
    "SimulationEnded",
    "EmptyBook",
    "EnvironmentStateError",
    "DayExhausted",
    "TrancheFilled",
    "NoActiveSubgoal",
    "NetworkError",
    "ShapeMismatch",
    "NonFinite",
    "AgentError",
    "Underfilled",
    "ConfigError",
    "ConfigInvalid",
    "DataMissing",
    "CheckpointMissing",
    # configuration
    "ExperimentConfig",
    "load_config",
    # market data
    "LEVELS",
    "LOT",
    "N_TRANCHES",
    "STEPS_PER_TRANCHE",
    "LobSnapshot",
    "TradeRecord",
    "TradingDay",
    "VolumeProfile",
    "SynthParams",
    "load_day",
    "write_day",
    "load_replay_dir",
    "load_synth_params",
    "generate_synthetic_day",
    "generate_synthetic_days",
    "compute_profile",
    # simulator
    "Side",
    "PriceChoice",
    "FillKind",
    "Fill",
    "ChildOrder",
    "FillLedger",
    "StepReport",
    "Accounting",
    "SimClock",
    "ExchangeSimulator",
    # environment
    "SUBGOALS",
    "Subgoal",
    "Action",
    "Blame",
    "RewardConfig",
    "ExtrinsicState",
    "IntrinsicState",
    "SubgoalOutcome",
    "ExecutionEnv",
    "lob_features",
    "round_to_lot",
    "slippage_bp",
    # networks
    "Module",
    "Dense",
    "Sequential",
    "LSTM",
    "LayerNorm",
    "MultiHeadSelfAttention",
    "EncoderBlock",
    "MhsaEncoderConfig",
    "MhsaEncoder",
    "TemporalConv",
    "MeanPool",
    "Adam",
    "mlp",
    "fc_forward",
    "fc_backward",
    "lstm_cell_update",
    "lstm_sequence",
    "mhsa_encode",
    "positional_encoding",
    "mse_loss",
    "adam_step",
    "save_checkpoint",
    "load_checkpoint",
    "numerical_grad",
    # reinforcement learning
    "Transition",
    "ReplayBuffer",
    "EpsilonSchedule",
    "DeepQAgent",
    "epsilon",
    "ddqn_target",
    "dqn_target",
    "stack_states",
    # macro trader
    "ProfileHistory",
    "TrancheAllocation",
    "ProfileDataset",
    "TrainResult",
    "MovingAverageEstimator",
    "LinearEstimator",
    "MlpEstimator",
    "LstmEstimator",
    "forecast_ma",
    "forecast_lstm",
    "forecast",
    "make_estimator",
    "train_estimator",
    "allocate",
    "build_dataset",
    "chronological_split",
    "project_simplex",
    "save_estimator",
    "load_estimator",
    "read_profiles_csv",
    "write_profiles_csv",
    "write_mse_report",
    # meta and micro traders
    "MetaQNetwork",
    "MetaTrader",
    "MicroQNetwork",
    "MicroTrader",
    "execute_window",
    "market_encoder",
    # baselines
    "RulePolicyState",
    "FlatTrader",
    "twap_policy_step",
    "ap_policy_step",
    "run_rule_tranche",
    "run_rule_day",
    "flat_agent_episode",
    # harness and reports
    "MarketData",
    "DayResult",
    "BacktestReport",
    "TrainingResult",
    "load_market_data",
    "run_training",
    "run_backtest",
    "run_m3t_day",
    "run_macro_training",
    "daily_slippage",
    "load_backtest",
    "strategy_label",
    "subgoal_speed",
    "tranche_speeds",
    "emit_report",
    "GenericPlot",
    "SubgoalPlot",
    "CurvePlot",
    "plot_subgoals",
    "plot_learning_curve",
]


# Imported classes and functions in __all__ appear to originate in top-level module
for name in __all__:
    obj = getattr(sys.modules[__name__], name)
    if inspect.isclass(obj) or inspect.isfunction(obj):
        obj.__module__ = __name__
del name, obj
