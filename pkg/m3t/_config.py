# -*- coding: utf-8 -*-
# Copyright (C) 2025 by the m3t developers
# All rights reserved. BSD 3-clause License.
# This file is part of the m3t package. Details of the copyright
# and user license can be found in the 'LICENSE' file distributed
# with the package.

"""Experiment configuration and ``key=value`` configuration files."""

import os
import typing
from dataclasses import dataclass, fields, replace
from typing import List, Optional, Sequence, Tuple

from ._errors import ConfigInvalid, MissingFile

# kw_only only supported from Python 3.10
KW_ONLY = {"kw_only": True} if "kw_only" in dataclass.__kwdefaults__ else {}


def parse_key_value_file(path: str) -> List[Tuple[int, str, str]]:
    """Parse a flat ``key=value`` text file.

    Blank lines and ``#`` comments are ignored.

    Args:
        path: File path.

    Returns:
        List of (line number, key, value) tuples.

    Raises:
        MissingFile: If the file does not exist.
        ConfigInvalid: If a non-blank line has no ``=``.
    """
    if not os.path.exists(path):
        raise MissingFile(path)
    entries = []
    with open(path) as f:
        for n, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigInvalid(f"{path}, line {n}: expected key=value.")
            key, value = (s.strip() for s in line.split("=", 1))
            entries.append((n, key, value))
    return entries


def _field_type(hint) -> type:
    """Strip :class:`~typing.Optional` from a type hint."""
    args = [a for a in typing.get_args(hint) if a is not type(None)]
    return args[0] if args else hint


def _coerce(typ: type, value: str):
    if typ is bool:
        if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(value)
        return value.lower() in ("true", "1", "yes")
    if typ is int:
        # accept 1e4 style integers
        number = float(value)
        if number != int(number):
            raise ValueError(value)
        return int(number)
    if typ is float:
        return float(value)
    if value.lower() == "none":
        return None
    return value


def coerce_fields(
    cls, entries: Sequence[Tuple[int, str, str]], path: str = ""
) -> dict:
    """Convert ``key=value`` entries to keyword arguments of a dataclass.

    Args:
        cls: Dataclass type.
        entries: Entries as returned by :func:`parse_key_value_file`.
        path: File name used in error messages.

    Returns:
        Dict of field values.

    Raises:
        ConfigInvalid: If a key is unknown or a value cannot be coerced.
    """
    hints = typing.get_type_hints(cls)
    names = {f.name for f in fields(cls) if f.init}
    kwargs = {}
    for n, key, value in entries:
        if key not in names:
            raise ConfigInvalid(f"{path}, line {n}: unknown key {key!r}.")
        try:
            kwargs[key] = _coerce(_field_type(hints[key]), value)
        except ValueError as exc:
            raise ConfigInvalid(
                f"{path}, line {n}: cannot interpret {value!r} for {key!r}."
            ) from exc
    return kwargs


AGENTS = ("m3t", "dqn", "ddqn", "vwap", "ap")
REWARD_MODES = ("sparse", "dense")
RL_BACKBONES = ("ddqn", "dqn")
MICRO_BACKBONES = ("mhsa", "lstm", "cnn", "fc")
MACRO_ESTIMATORS = ("lstm", "ma")


@dataclass(frozen=True, **KW_ONLY)
class ExperimentConfig:
    """Configuration of a training or backtest run.

    Args:
        dataset: Stock or dataset name used to label report rows.
        data_dir: Replay directory of recorded days. If ``None``, a
           synthetic month is generated.
        synth_seed: Seed of the synthetic day set.
        synth_params: Path of a synthetic generator parameter file.
        n_days: Number of synthetic trading days (after the history
           days).
        history_days: Days of volume profile history preceding the first
           dataset day, used only by the Macro Trader.
        train_fraction: Chronological fraction of days used for RL
           training; the remainder are backtest days.
        parent_shares: Parent order size per backtest day.
        side: +1 to sell, -1 to buy.
        episodes: Training episodes (one episode is one training day).
        gamma: Discount factor.
        lr: Learning rate of the Meta and Micro Traders.
        macro_lr: Learning rate of the volume profile estimators.
        macro_epochs: Estimator training epochs.
        tranche_min: Lower end of the training tranche size range.
        tranche_max: Upper end of the training tranche size range.
        tranche_divisor: Divisor applied to the training tranche size
           range to obtain tranche quotas in shares.
        reward_mode: Intrinsic reward mode, ``sparse`` or ``dense``.
        agent: Execution strategy (``m3t``, ``dqn``, ``ddqn``, ``vwap`` or
           ``ap``).
        rl_backbone: Target computation of the M3T agents (``ddqn`` or
           ``dqn``).
        micro_backbone: Market encoder of the Micro Trader.
        macro_estimator: Volume profile estimator (``lstm`` or ``ma``).
        macro_checkpoint: Trained LSTM estimator checkpoint.
        replay_capacity: Experience replay capacity.
        batch_size: Experience replay batch size.
        epsilon_min: Exploration floor.
        epsilon_decay: Exploration decay factor.
        epsilon_every: Episodes per exploration decay.
        target_sync: Gradient updates between target network syncs.
        learn_every: Environment steps per Micro Trader gradient update.
        hidden: Hidden width of the Meta MLP and Micro Trader heads.
        model_width: Width of the Micro Trader market encoder.
        ff_width: Feed-forward width of the self-attention encoder.
        checkpoint_every: Episodes between checkpoints.
        iota: Queue length estimator divisor.
        fail_penalty: Penalty for an unfilled subgoal (bp).
        meta_blame_step_ratio: Minimum-step ratio above which a failed
           subgoal is blamed on the Meta Trader.
        meta_blame_liquidity_ratio: Market volume ratio above which a
           failed subgoal is blamed on the Meta Trader.
        seed: Seed of agents and training randomization.
        output_dir: Directory for checkpoints, curves and reports.
    """

    dataset: str = "synthetic"
    data_dir: Optional[str] = None
    synth_seed: int = 0
    synth_params: Optional[str] = None
    n_days: int = 21
    history_days: int = 20
    train_fraction: float = 0.8
    parent_shares: int = 120000
    side: int = 1
    episodes: int = 10000
    gamma: float = 0.99
    lr: float = 5e-5
    macro_lr: float = 1e-4
    macro_epochs: int = 5000
    tranche_min: int = 100000
    tranche_max: int = 200000
    tranche_divisor: int = 10
    reward_mode: str = "dense"
    agent: str = "m3t"
    rl_backbone: str = "ddqn"
    micro_backbone: str = "mhsa"
    macro_estimator: str = "lstm"
    macro_checkpoint: Optional[str] = None
    replay_capacity: int = 10000
    batch_size: int = 128
    epsilon_min: float = 0.05
    epsilon_decay: float = 0.99
    epsilon_every: int = 5
    target_sync: int = 200
    learn_every: int = 4
    hidden: int = 64
    model_width: int = 32
    ff_width: int = 64
    checkpoint_every: int = 10
    iota: int = 3
    fail_penalty: float = -99.0
    meta_blame_step_ratio: float = 0.30
    meta_blame_liquidity_ratio: float = 0.05
    seed: int = 0
    output_dir: str = "m3t-output"

    def __post_init__(self):
        self.validate()

    def validate(self):
        """Check value ranges and choices.

        Raises:
            ConfigInvalid: If a value is out of range.
        """
        choices = {
            "agent": AGENTS,
            "reward_mode": REWARD_MODES,
            "rl_backbone": RL_BACKBONES,
            "micro_backbone": MICRO_BACKBONES,
            "macro_estimator": MACRO_ESTIMATORS,
        }
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                raise ConfigInvalid(f"{name} must be one of {', '.join(allowed)}.")
        positive = (
            "n_days parent_shares episodes lr macro_lr tranche_min tranche_max "
            "tranche_divisor replay_capacity batch_size epsilon_every target_sync "
            "learn_every hidden model_width ff_width checkpoint_every iota"
        )
        for name in positive.split():
            if getattr(self, name) <= 0:
                raise ConfigInvalid(f"{name} must be positive.")
        if self.side not in (1, -1):
            raise ConfigInvalid("side must be 1 (sell) or -1 (buy).")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigInvalid("gamma must lie in [0, 1].")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigInvalid("train_fraction must lie in (0, 1).")
        if self.tranche_min > self.tranche_max:
            raise ConfigInvalid("tranche_min exceeds tranche_max.")
        if self.history_days < 0 or self.macro_epochs < 0:
            raise ConfigInvalid("history_days and macro_epochs must be non-negative.")
        if not 0.0 < self.epsilon_min <= 1.0 or not 0.0 < self.epsilon_decay <= 1.0:
            raise ConfigInvalid("epsilon_min and epsilon_decay must lie in (0, 1].")
        for name in ("meta_blame_step_ratio", "meta_blame_liquidity_ratio"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ConfigInvalid(f"{name} must lie in (0, 1).")
        if self.model_width % 4:
            raise ConfigInvalid("model_width must be divisible by the 4 attention heads.")

    def override(self, **kwargs) -> "ExperimentConfig":
        """Copy with the non-``None`` keyword values replaced."""
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


def load_config(path: Optional[str] = None, **overrides) -> ExperimentConfig:
    """Load an experiment configuration.

    Args:
        path: ``key=value`` configuration file. If ``None``, defaults are
           used.
        **overrides: Field values taking precedence over the file
           (``None`` values are ignored).

    Returns:
        Validated configuration.
    """
    kwargs = {}
    if path is not None:
        kwargs = coerce_fields(ExperimentConfig, parse_key_value_file(path), path)
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigInvalid(str(exc)) from exc
