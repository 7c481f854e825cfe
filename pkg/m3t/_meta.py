# -*- coding: utf-8 -*-
# Copyright (C) 2025 by the m3t developers
# All rights reserved. BSD 3-clause License.
# This file is part of the m3t package. Details of the copyright
# and user license can be found in the 'LICENSE' file distributed
# with the package.

"""Subgoal selection agent."""

from typing import Optional, Sequence, Tuple

import numpy as np

from ._hmdp import EXTRINSIC_FEATURES, SUBGOALS, ExtrinsicState, Subgoal
from ._nn import Module, mlp
from ._rl import DeepQAgent, State, Transition


class MetaQNetwork(Module):
    """Perceptron from the extrinsic state vector to nine subgoal values.

    Args:
        hidden: Widths of the hidden layers.
        rng: Random generator.
    """

    def __init__(self, hidden: Sequence[int] = (64, 64), rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = np.random.default_rng(0) if rng is None else rng
        widths = (EXTRINSIC_FEATURES,) + tuple(hidden) + (len(SUBGOALS),)
        self.net = self.add_module("net", mlp(widths, rng))

    def forward(self, inputs: State) -> np.ndarray:
        return self.net(inputs[0])

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (self.net.backward(grad),)


def extrinsic_input(state: ExtrinsicState) -> State:
    return (state.as_array(),)


class MetaTrader(DeepQAgent):
    """Double deep Q-learning agent choosing mini-tranche subgoals.

    Keyword arguments other than `hidden` and `seed` are passed to
    :class:`~m3t.DeepQAgent`.
    """

    def __init__(self, hidden: Sequence[int] = (64, 64), seed: Optional[int] = 0, **kwargs):
        rng = np.random.default_rng(seed)
        super().__init__(MetaQNetwork(hidden, rng), len(SUBGOALS), seed=seed, **kwargs)

    @classmethod
    def from_config(cls, config, seed: Optional[int] = None) -> "MetaTrader":
        return cls(
            hidden=(config.hidden, config.hidden),
            seed=config.seed if seed is None else seed,
            gamma=config.gamma,
            lr=config.lr,
            capacity=config.replay_capacity,
            batch_size=config.batch_size,
            target_sync=config.target_sync,
            double=config.rl_backbone == "ddqn",
        )

    def select_subgoal(self, state: ExtrinsicState, eps: float = 0.0) -> Subgoal:
        """Epsilon-greedy subgoal; ties go to the lowest id."""
        return SUBGOALS[self.act(extrinsic_input(state), eps)]

    def observe_subgoal(
        self,
        state: ExtrinsicState,
        subgoal: Subgoal,
        reward: float,
        next_state: ExtrinsicState,
        terminal: bool,
        steps: int = 1,
    ):
        """Store a subgoal transition spanning `steps` environment steps."""
        self.observe(
            Transition(
                extrinsic_input(state),
                subgoal.index,
                reward,
                extrinsic_input(next_state),
                terminal,
                max(steps, 1),
            )
        )
