# -*- coding: utf-8 -*-
# Copyright (C) 2025 by the m3t developers
# All rights reserved. BSD 3-clause License.
# This file is part of the m3t package. Details of the copyright
# and user license can be found in the 'LICENSE' file distributed
# with the package.

"""Subgoal-conditioned order placement agent."""

import logging
from typing import List, Optional, Tuple

import numpy as np

from ._hmdp import N_FEATURES, SUBGOALS, WINDOW_ROWS, Action, IntrinsicState
from ._nn import (
    LSTM,
    Dense,
    Flatten,
    LastStep,
    MeanPool,
    MhsaEncoder,
    MhsaEncoderConfig,
    Module,
    Sequential,
    TemporalConv,
    mlp,
)
from ._rl import DeepQAgent, State, Transition

logger = logging.getLogger(__name__)

BACKBONES = ("mhsa", "lstm", "cnn", "fc")


def market_encoder(
    backbone: str,
    width: int,
    ff_width: int,
    rng: np.random.Generator,
    layers: int = 3,
    heads: int = 4,
) -> Module:
    """Encoder from a market window (`B`, rows, features) to (`B`, `width`).

    Args:
        backbone: ``"mhsa"`` (self-attention with mean pooling), ``"lstm"``
           (last hidden state), ``"cnn"`` (temporal convolution with mean
           pooling) or ``"fc"`` (dense layer over the flattened window).
        width: Output width.
        ff_width: Feed-forward width of the self-attention blocks.
        rng: Random generator.
        layers: Self-attention blocks.
        heads: Attention heads.
    """
    if backbone == "mhsa":
        config = MhsaEncoderConfig(layers=layers, heads=heads, width=width, ff_width=ff_width)
        return Sequential(MhsaEncoder(N_FEATURES, config, rng), MeanPool())
    if backbone == "lstm":
        return Sequential(LSTM(N_FEATURES, width, rng), LastStep())
    if backbone == "cnn":
        return Sequential(TemporalConv(N_FEATURES, width, 3, rng), MeanPool())
    if backbone == "fc":
        return Sequential(Flatten(), Dense(WINDOW_ROWS * N_FEATURES, width, "relu", rng))
    raise ValueError(f"Unknown backbone {backbone!r}; expected one of {', '.join(BACKBONES)}.")


class MicroQNetwork(Module):
    """Action values from the market window, subgoal and progress.

    Three branches, a market encoder, a dense progress layer and a
    three layer subgoal perceptron, are concatenated and mapped to the
    three action values by a single dense layer.

    Args:
        backbone: Market encoder kind.
        width: Market encoder width.
        hidden: Width of the progress and subgoal branches.
        ff_width: Feed-forward width of the self-attention encoder.
        rng: Random generator.
    """

    def __init__(
        self,
        backbone: str = "mhsa",
        width: int = 32,
        hidden: int = 64,
        ff_width: int = 64,
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__()
        rng = np.random.default_rng(0) if rng is None else rng
        self.backbone = backbone
        self.widths = (width, hidden, hidden)
        self.market = self.add_module("market", market_encoder(backbone, width, ff_width, rng))
        self.progress = self.add_module("progress", Dense(2, hidden, "relu", rng))
        self.subgoal = self.add_module(
            "subgoal",
            mlp((len(SUBGOALS), hidden, hidden, hidden), rng, final_activation="relu"),
        )
        self.fusion = self.add_module("fusion", Dense(sum(self.widths), len(Action), rng=rng))

    def forward(self, inputs: State) -> np.ndarray:
        window, onehot, progress = inputs
        z = np.concatenate(
            (self.market(window), self.progress(progress), self.subgoal(onehot)), axis=1
        )
        return self.fusion(z)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        dz = self.fusion.backward(grad)
        a, b, _ = self.widths
        return (
            self.market.backward(dz[:, :a]),
            self.subgoal.backward(dz[:, a + b :]),
            self.progress.backward(dz[:, a : a + b]),
        )


def intrinsic_input(state: IntrinsicState) -> State:
    return (state.lob_window, state.subgoal_onehot, state.progress)


class MicroTrader(DeepQAgent):
    """Double deep Q-learning agent placing one-lot child orders.

    Keyword arguments other than the network shape and `seed` are
    passed to :class:`~m3t.DeepQAgent`.
    """

    def __init__(
        self,
        backbone: str = "mhsa",
        width: int = 32,
        hidden: int = 64,
        ff_width: int = 64,
        seed: Optional[int] = 0,
        **kwargs,
    ):
        rng = np.random.default_rng(seed)
        network = MicroQNetwork(backbone, width, hidden, ff_width, rng)
        super().__init__(network, len(Action), seed=seed, **kwargs)
        self.env_steps = 0

    @classmethod
    def from_config(cls, config, seed: Optional[int] = None) -> "MicroTrader":
        return cls(
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
            double=config.rl_backbone == "ddqn",
        )

    def select_action(self, state: IntrinsicState, eps: float = 0.0) -> Action:
        """Epsilon-greedy action; ties go to the lowest action id."""
        return Action(self.act(intrinsic_input(state), eps))

    def observe_step(
        self,
        state: IntrinsicState,
        action: Action,
        reward: float,
        next_state: IntrinsicState,
        terminal: bool,
    ):
        self.observe(
            Transition(
                intrinsic_input(state),
                int(action),
                reward,
                intrinsic_input(next_state),
                terminal,
            )
        )


def execute_window(
    env,
    state: IntrinsicState,
    trader: MicroTrader,
    eps: float = 0.0,
    learn: bool = False,
    learn_every: int = 4,
) -> Tuple[float, List[float]]:
    """Run the Micro Trader until the active window terminates.

    Args:
        env: Environment with an active window.
        state: Initial intrinsic state of the window.
        trader: Acting agent.
        eps: Exploration rate.
        learn: Store transitions and update the agent.
        learn_every: Environment steps per gradient update.

    Returns:
        Sum of intrinsic rewards and the losses of the updates made.
    """
    total = 0.0
    losses = []
    done = False
    while not done:
        action = trader.select_action(state, eps)
        next_state, reward, done = env.micro_step(action)
        total += reward
        if learn:
            trader.observe_step(state, action, reward, next_state, done)
            trader.env_steps += 1
            if trader.env_steps % learn_every == 0:
                loss = trader.learn()
                if loss is not None:
                    losses.append(loss)
        state = next_state
    return total, losses
