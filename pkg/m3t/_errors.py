# -*- coding: utf-8 -*-
# Copyright (C) 2025 by the m3t developers
# All rights reserved. BSD 3-clause License.
# This file is part of the m3t package. Details of the copyright
# and user license can be found in the 'LICENSE' file distributed
# with the package.

"""Exception classes."""

from typing import Optional


class M3TError(Exception):
    """Base class for all errors raised by this package."""


# Market data


class DataError(M3TError, ValueError):
    """Invalid or unusable market or profile data."""


class MissingFile(DataError):
    """A required input file does not exist."""

    def __init__(self, path):
        self.path = path
        super().__init__(f"File {path} does not exist.")


class MalformedRow(DataError):
    """A data file row could not be parsed or violates a type invariant.

    Args:
        line: One-based line number of the offending row (the header is
           line 1).
        reason: Description of the problem.
        path: Name of the offending file, if known.
    """

    def __init__(self, line: Optional[int], reason: str, path: Optional[str] = None):
        self.line = line
        self.path = path
        if line is None:
            where = path or "constructed value"
        else:
            where = f"{path}, line {line}" if path else f"line {line}"
        super().__init__(f"Malformed row ({where}): {reason}")


class CrossedBook(MalformedRow):
    """A snapshot has ask1 <= bid1."""

    def __init__(self, line: Optional[int], path: Optional[str] = None):
        super().__init__(line, "crossed or locked book (ask1 <= bid1)", path)


class ShortDay(DataError):
    """A trading day has fewer snapshots than eight full tranches."""

    def __init__(self, count: int, path: Optional[str] = None):
        self.count = count
        self.path = path
        src = f" in {path}" if path else ""
        super().__init__(f"Short trading day{src}: {count} snapshots.")


class InvalidParams(DataError):
    """Synthetic data generator parameters are invalid."""


class ZeroVolumeDay(DataError):
    """A trading day has no traded volume."""


class BadHistory(DataError):
    """A profile history has the wrong shape or rows off the simplex."""


class EmptyDataset(DataError):
    """An estimator dataset (or one of its splits) is empty."""


class NegativeParent(DataError):
    """A parent order size is negative or not lot aligned."""


class EmptyCounts(DataError):
    """Subgoal counts are empty or all zero."""


class InvalidSubgoal(DataError):
    """A subgoal id is not an integer in 1..9."""


# Simulation


class SimulationError(M3TError, RuntimeError):
    """Invalid request to the exchange simulator."""


class NoQuote(SimulationError):
    """The book side needed to price an order is empty."""


class SimulationEnded(SimulationError):
    """The simulator has consumed all snapshots of the day."""


class EmptyBook(SimulationError):
    """No displayed volume to liquidate against."""


# Environment


class EnvironmentStateError(M3TError, RuntimeError):
    """Operation invalid in the current environment state."""


class DayExhausted(EnvironmentStateError):
    """All tranches of the day have been executed."""


class TrancheFilled(EnvironmentStateError):
    """The active tranche has no remaining quota."""


class NoActiveSubgoal(EnvironmentStateError):
    """No subgoal (or execution window) is active."""


# Networks


class NetworkError(M3TError, ValueError):
    """Numerical error in the neural network layers."""


class ShapeMismatch(NetworkError):
    """Array shapes do not agree."""


class NonFinite(NetworkError):
    """A NaN or infinite value was produced."""


# Agents


class AgentError(M3TError, RuntimeError):
    """Invalid agent operation."""


class Underfilled(AgentError):
    """Replay buffer holds fewer transitions than the requested batch."""


# Configuration


class ConfigError(M3TError, ValueError):
    """Invalid experiment configuration."""


class ConfigInvalid(ConfigError):
    """A configuration value is missing, unknown or out of range."""


class DataMissing(ConfigError):
    """The configured data source yields no usable days."""


class CheckpointMissing(ConfigError):
    """A required checkpoint file does not exist."""
