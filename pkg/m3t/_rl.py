# -*- coding: utf-8 -*-
# Copyright (C) 2025 by the m3t developers
# All rights reserved. BSD 3-clause License.
# This file is part of the m3t package. Details of the copyright
# and user license can be found in the 'LICENSE' file distributed
# with the package.

"""Experience replay, exploration schedule and deep Q-learning."""

import copy
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ._errors import NonFinite, ShapeMismatch, Underfilled
from ._nn import Adam, Module, load_checkpoint, mse_loss, save_checkpoint

logger = logging.getLogger(__name__)

State = Tuple[np.ndarray, ...]
QFunction = Callable[[State], np.ndarray]


@dataclass(frozen=True, eq=False)
class Transition:
    """One stored experience.

    Args:
        state: State as a tuple of arrays (network inputs).
        action: Action (or zero-based subgoal index).
        reward: Accumulated reward over the transition.
        next_state: Following state.
        terminal: Whether `next_state` is terminal.
        steps: Environment steps spanned by the transition.
    """

    state: State
    action: int
    reward: float
    next_state: State
    terminal: bool
    steps: int = 1

    def __post_init__(self):
        if not math.isfinite(self.reward):
            raise NonFinite(f"Transition reward {self.reward} is not finite.")
        if self.steps < 1:
            raise ValueError("A transition spans at least one step.")


def stack_states(states: Sequence[State]) -> State:
    """Stack a sequence of states into batched network inputs."""
    return tuple(np.stack(parts) for parts in zip(*states))


class ReplayBuffer:
    """Fixed capacity ring buffer of transitions with uniform sampling.

    Args:
        capacity: Maximum number of stored transitions.
        seed: Seed of the sampler.
    """

    def __init__(self, capacity: int = 10000, seed: Optional[int] = 0):
        if capacity <= 0:
            raise ValueError("Replay capacity must be positive.")
        self.capacity = capacity
        self.rng = np.random.default_rng(seed)
        self._items: List[Transition] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, transition: Transition):
        """Store a transition, overwriting the oldest one when full."""
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._next] = transition
        self._next = (self._next + 1) % self.capacity

    def sample_indices(self, batch: int) -> np.ndarray:
        if len(self._items) < batch:
            raise Underfilled(
                f"Replay buffer holds {len(self._items)} transitions, {batch} requested."
            )
        return self.rng.integers(0, len(self._items), size=batch)

    def sample(self, batch: int) -> List[Transition]:
        """Sample `batch` transitions uniformly with replacement.

        Raises:
            Underfilled: If fewer than `batch` transitions are stored.
        """
        return [self._items[k] for k in self.sample_indices(batch)]


@dataclass(frozen=True)
class EpsilonSchedule:
    """Stepwise exponential exploration schedule.

    Args:
        initial: Initial exploration rate.
        decay: Decay factor.
        every: Episodes per decay application.
        minimum: Exploration floor.
    """

    initial: float = 1.0
    decay: float = 0.99
    every: int = 5
    minimum: float = 0.05

    def __call__(self, episode: int) -> float:
        if episode < 0:
            raise ValueError("Episode index must be non-negative.")
        return max(self.minimum, self.initial * self.decay ** (episode // self.every))

    @classmethod
    def from_config(cls, config) -> "EpsilonSchedule":
        return cls(
            decay=config.epsilon_decay,
            every=config.epsilon_every,
            minimum=config.epsilon_min,
        )


def epsilon(episode: int, schedule: EpsilonSchedule = EpsilonSchedule()) -> float:
    """Exploration rate for an episode."""
    return schedule(episode)


def _batch_arrays(batch: Sequence[Transition]):
    rewards = np.array([t.reward for t in batch], dtype=float)
    terminal = np.array([t.terminal for t in batch], dtype=bool)
    return rewards, terminal, stack_states([t.next_state for t in batch])


def _check_q(q: np.ndarray, n: int, what: str):
    if q.ndim != 2 or q.shape[0] != n:
        raise ShapeMismatch(f"{what} values have shape {q.shape}, expected ({n}, actions).")


def ddqn_target(
    batch: Sequence[Transition],
    online_q: QFunction,
    target_q: QFunction,
    gamma: float = 0.99,
) -> np.ndarray:
    """Double Q-learning targets.

    The next action is selected by the online value function and
    evaluated by the target value function. Terminal transitions are
    not bootstrapped.

    Args:
        batch: Transitions.
        online_q: Online value function of batched states.
        target_q: Target value function of batched states.
        gamma: Discount factor.

    Returns:
        Array of targets.

    Raises:
        ShapeMismatch: If the value functions disagree in shape.
    """
    rewards, terminal, next_states = _batch_arrays(batch)
    q_online = online_q(next_states)
    q_target = target_q(next_states)
    _check_q(q_online, len(batch), "Online")
    if q_target.shape != q_online.shape:
        raise ShapeMismatch(f"Target values {q_target.shape} != online {q_online.shape}.")
    best = np.argmax(q_online, axis=1)
    bootstrap = q_target[np.arange(len(batch)), best]
    return rewards + gamma * np.where(terminal, 0.0, bootstrap)


def dqn_target(
    batch: Sequence[Transition], target_q: QFunction, gamma: float = 0.99
) -> np.ndarray:
    """Standard Q-learning targets using the maximum of the target values."""
    rewards, terminal, next_states = _batch_arrays(batch)
    q_target = target_q(next_states)
    _check_q(q_target, len(batch), "Target")
    return rewards + gamma * np.where(terminal, 0.0, q_target.max(axis=1))


class DeepQAgent:
    """Value-based agent with experience replay and a target network.

    The network is a :class:`~m3t.Module` whose ``forward`` maps a tuple
    of batched input arrays to action values of shape (`B`, `A`).

    Args:
        network: Online value network; the target network is a copy.
        n_actions: Number of actions.
        gamma: Discount factor.
        lr: Adam learning rate.
        capacity: Replay capacity.
        batch_size: Replay batch size.
        target_sync: Gradient updates between target network syncs.
        double: Use double Q-learning targets (otherwise standard targets).
        seed: Seed of exploration and replay sampling.
    """

    def __init__(
        self,
        network: Module,
        n_actions: int,
        *,
        gamma: float = 0.99,
        lr: float = 5e-5,
        capacity: int = 10000,
        batch_size: int = 128,
        target_sync: int = 200,
        double: bool = True,
        seed: Optional[int] = 0,
    ):
        self.online = network
        self.target = copy.deepcopy(network)
        self.n_actions = n_actions
        self.gamma = gamma
        self.batch_size = batch_size
        self.target_sync = target_sync
        self.double = double
        self.optimizer = Adam(self.online, lr)
        self.buffer = ReplayBuffer(capacity, seed)
        self.rng = np.random.default_rng(None if seed is None else seed + 1)
        self.updates = 0

    def q_values(self, state: State) -> np.ndarray:
        """Online action values of a single state."""
        return self.online.forward(stack_states([state]))[0]

    def act(self, state: State, eps: float = 0.0) -> int:
        """Epsilon-greedy action selection."""
        if eps > 0.0 and self.rng.random() < eps:
            return int(self.rng.integers(self.n_actions))
        return int(np.argmax(self.q_values(state)))

    def observe(self, transition: Transition):
        self.buffer.push(transition)

    def targets(self, batch: Sequence[Transition]) -> np.ndarray:
        if self.double:
            return ddqn_target(batch, self.online.forward, self.target.forward, self.gamma)
        return dqn_target(batch, self.target.forward, self.gamma)

    def learn(self) -> Optional[float]:
        """One gradient update from a replay batch.

        Returns:
            Batch loss, or ``None`` if the buffer holds too few transitions.
        """
        if len(self.buffer) < self.batch_size:
            return None
        batch = self.buffer.sample(self.batch_size)
        targets = self.targets(batch)
        q = self.online.forward(stack_states([t.state for t in batch]))
        rows = np.arange(len(batch))
        actions = np.array([t.action for t in batch])
        loss, grad = mse_loss(q[rows, actions], targets)
        grad_q = np.zeros_like(q)
        grad_q[rows, actions] = grad
        self.online.zero_grad()
        self.online.backward(grad_q)
        self.optimizer.step()
        self.updates += 1
        if self.updates % self.target_sync == 0:
            self.sync_target()
        return loss

    def sync_target(self):
        self.target.copy_from(self.online)

    def save(self, path: str):
        save_checkpoint(
            path,
            {"online": self.online, "target": self.target},
            updates=np.array([self.updates]),
        )

    def load(self, path: str):
        extra = load_checkpoint(path, {"online": self.online, "target": self.target})
        self.updates = int(extra.get("updates", [0])[0])
