# -*- coding: utf-8 -*-
# Copyright (C) 2025 by the m3t developers
# All rights reserved. BSD 3-clause License.
# This file is part of the m3t package. Details of the copyright
# and user license can be found in the 'LICENSE' file distributed
# with the package.

"""Volume profile forecasting and parent order allocation."""

import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ._errors import (
    BadHistory,
    CheckpointMissing,
    DataError,
    EmptyDataset,
    MissingFile,
    NegativeParent,
)
from ._lob import LOT, N_TRANCHES, VolumeProfile
from ._nn import (
    LSTM,
    Adam,
    Dense,
    Flatten,
    LastStep,
    Module,
    check_finite,
    load_checkpoint,
    mlp,
    mse_loss,
    save_checkpoint,
)

logger = logging.getLogger(__name__)

#: Days of profile history used by a forecast.
HISTORY_DAYS = 20

ESTIMATORS = ("ma", "linear", "mlp", "lstm")

PROFILE_COLUMNS = ["day_id"] + [f"f{k + 1}" for k in range(N_TRANCHES)]


def _check_simplex_rows(rows: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(np.all(rows >= -tol) and np.all(np.abs(rows.sum(axis=-1) - 1.0) <= 1e-6))


@dataclass(frozen=True, eq=False)
class ProfileHistory:
    """Time-ordered volume profiles of consecutive past days.

    Args:
        profiles: Array of shape (`n`, 8), oldest day first.

    Raises:
        BadHistory: If the shape is wrong or a row is off the simplex.
    """

    profiles: np.ndarray

    def __post_init__(self):
        p = np.array(self.profiles, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != N_TRANCHES or p.shape[0] == 0:
            raise BadHistory(f"Profile history must have shape (n, {N_TRANCHES}), got {p.shape}.")
        if not _check_simplex_rows(p):
            raise BadHistory("Profile history rows must lie on the simplex.")
        p.setflags(write=False)
        object.__setattr__(self, "profiles", p)

    @classmethod
    def from_profiles(cls, profiles: Sequence[VolumeProfile]) -> "ProfileHistory":
        return cls(np.array([p.as_array() for p in profiles]))

    @property
    def n_days(self) -> int:
        return self.profiles.shape[0]

    def window(self, n: int = HISTORY_DAYS) -> np.ndarray:
        """The last `n` rows.

        Raises:
            BadHistory: If fewer than `n` days are available.
        """
        if self.n_days < n:
            raise BadHistory(f"Need {n} days of history, have {self.n_days}.")
        return self.profiles[-n:]


@dataclass(frozen=True)
class TrancheAllocation:
    """Shares assigned to each of the eight tranches.

    Args:
        shares: Lot aligned, non-negative share counts.
    """

    shares: Tuple[int, ...]

    def __post_init__(self):
        if len(self.shares) != N_TRANCHES:
            raise DataError(f"An allocation has {N_TRANCHES} tranches.")
        if any(s < 0 or s % LOT for s in self.shares):
            raise DataError(f"Allocation {self.shares} is not lot aligned.")
        object.__setattr__(self, "shares", tuple(int(s) for s in self.shares))

    @property
    def total(self) -> int:
        return sum(self.shares)


def project_simplex(raw: np.ndarray) -> np.ndarray:
    """Clip at zero and renormalize the last axis to sum to one.

    Rows that clip to all zero map to the uniform profile.
    """
    clipped = np.maximum(raw, 0.0)
    total = clipped.sum(axis=-1, keepdims=True)
    uniform = np.full_like(clipped, 1.0 / clipped.shape[-1])
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, clipped / np.where(total > 0, total, 1.0), uniform)


def forecast_ma(hist: ProfileHistory, n: int = HISTORY_DAYS) -> VolumeProfile:
    """Moving average forecast: column means of the last `n` profiles."""
    mean = hist.window(n).mean(axis=0)
    return VolumeProfile(tuple(mean / mean.sum()))


class MovingAverageEstimator(Module):
    """Parameter-free estimator forecasting the window mean."""

    kind = "ma"

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._shape = x.shape
        return x.mean(axis=1)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return np.repeat(grad[:, None, :], self._shape[1], axis=1) / self._shape[1]


class LinearEstimator(Module):
    """Linear map of the flattened history window."""

    kind = "linear"

    def __init__(self, n: int = HISTORY_DAYS, rng: Optional[np.random.Generator] = None):
        super().__init__()
        self.flatten = self.add_module("flatten", Flatten())
        self.fc = self.add_module("fc", Dense(n * N_TRANCHES, N_TRANCHES, rng=rng))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.fc(self.flatten(x))

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return self.flatten.backward(self.fc.backward(grad))

    def fit_lstsq(self, x: np.ndarray, y: np.ndarray):
        """Set the weights to the least squares solution."""
        a = np.concatenate((x.reshape(x.shape[0], -1), np.ones((x.shape[0], 1))), axis=1)
        sol, *_ = np.linalg.lstsq(a, y, rcond=None)
        self.fc.params["weight"][...] = sol[:-1]
        self.fc.params["bias"][...] = sol[-1]


class MlpEstimator(Module):
    """Two hidden layer perceptron over the flattened history window."""

    kind = "mlp"

    def __init__(
        self,
        n: int = HISTORY_DAYS,
        hidden: int = 64,
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__()
        rng = np.random.default_rng(0) if rng is None else rng
        self.hidden = hidden
        self.flatten = self.add_module("flatten", Flatten())
        self.net = self.add_module("net", mlp((n * N_TRANCHES, hidden, hidden, N_TRANCHES), rng))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.net(self.flatten(x))

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return self.flatten.backward(self.net.backward(grad))


class LstmEstimator(Module):
    """LSTM over the daily profiles with a residual linear head.

    The final hidden state is mapped by a dense layer to eight values
    that are added to the window mean profile. The head starts at zero,
    so an untrained estimator forecasts the moving average.
    """

    kind = "lstm"

    def __init__(self, hidden: int = 32, rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = np.random.default_rng(0) if rng is None else rng
        self.hidden = hidden
        self.lstm = self.add_module("lstm", LSTM(N_TRANCHES, hidden, rng))
        self.last = self.add_module("last", LastStep())
        self.fc = self.add_module("fc", Dense(hidden, N_TRANCHES, rng=rng))
        self.fc.params["weight"][...] = 0.0
        self.fc.params["bias"][...] = 0.0

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[-1] != N_TRANCHES:
            raise BadHistory(f"Expected (batch, days, {N_TRANCHES}) history, got {x.shape}.")
        self._days = x.shape[1]
        return self.fc(self.last(self.lstm(x))) + x.mean(axis=1)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        dx = self.lstm.backward(self.last.backward(self.fc.backward(grad)))
        return dx + np.repeat(grad[:, None, :], self._days, axis=1) / self._days


def make_estimator(
    kind: str, n: int = HISTORY_DAYS, hidden: int = 32, seed: int = 0
) -> Module:
    """Construct an untrained estimator of the given kind."""
    rng = np.random.default_rng(seed)
    if kind == "ma":
        return MovingAverageEstimator()
    if kind == "linear":
        return LinearEstimator(n, rng)
    if kind == "mlp":
        return MlpEstimator(n, hidden, rng)
    if kind == "lstm":
        return LstmEstimator(hidden, rng)
    raise ValueError(f"Unknown estimator {kind!r}; expected one of {', '.join(ESTIMATORS)}.")


def forecast(hist: ProfileHistory, estimator: Module, n: int = HISTORY_DAYS) -> VolumeProfile:
    """Forecast the next profile and project it onto the simplex."""
    raw = check_finite(estimator.forward(hist.window(n)[None])[0], "profile forecast")
    return VolumeProfile(tuple(project_simplex(raw)))


def forecast_lstm(hist: ProfileHistory, estimator: LstmEstimator) -> VolumeProfile:
    """Forecast with an LSTM estimator."""
    return forecast(hist, estimator)


@dataclass(frozen=True, eq=False)
class ProfileDataset:
    """Sliding window estimator samples.

    Args:
        inputs: History windows of shape (`S`, `n`, 8).
        targets: Next-day profiles of shape (`S`, 8).
    """

    inputs: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return self.targets.shape[0]

    def subset(self, index: np.ndarray) -> "ProfileDataset":
        return ProfileDataset(self.inputs[index], self.targets[index])


def build_dataset(profiles: np.ndarray, n: int = HISTORY_DAYS) -> ProfileDataset:
    """Build samples pairing each window of `n` days with the next day.

    Raises:
        EmptyDataset: If fewer than `n` + 1 profiles are given.
    """
    profiles = np.asarray(profiles, dtype=np.float64)
    if profiles.ndim != 2 or profiles.shape[1] != N_TRANCHES:
        raise BadHistory(f"Profiles must have shape (days, {N_TRANCHES}).")
    count = profiles.shape[0] - n
    if count <= 0:
        raise EmptyDataset(f"{profiles.shape[0]} days do not make a {n}-day window sample.")
    idx = np.arange(count)[:, None] + np.arange(n)[None, :]
    return ProfileDataset(profiles[idx], profiles[n:])


def chronological_split(
    n: int, fractions: Sequence[float] = (0.6, 0.2, 0.2)
) -> Tuple[np.ndarray, ...]:
    """Split ``range(n)`` into consecutive index blocks.

    Raises:
        EmptyDataset: If any block is empty.
    """
    bounds = np.round(np.cumsum((0.0,) + tuple(fractions)) / sum(fractions) * n).astype(int)
    parts = tuple(np.arange(bounds[k], bounds[k + 1]) for k in range(len(fractions)))
    if any(p.size == 0 for p in parts):
        raise EmptyDataset(f"Cannot split {n} samples into {len(fractions)} non-empty blocks.")
    return parts


def evaluate_mse(estimator: Module, data: ProfileDataset) -> float:
    """MSE of simplex-projected forecasts."""
    pred = project_simplex(estimator.forward(data.inputs))
    return float(np.mean((pred - data.targets) ** 2))


@dataclass(repr=False)
class TrainResult:
    """Outcome of :func:`train_estimator`.

    Args:
        estimator: Estimator with best-validation parameters.
        train_mse: Training MSE per epoch. A least squares fit has a
           single entry, the MSE of the solution.
        val_mse: Validation MSE before training and after each epoch,
           or the single validation MSE of a least squares fit.
        best_epoch: Epoch of the selected parameters (0 is the
           initialization).
        test_mse: Test MSE of the selected parameters.
    """

    estimator: Module
    train_mse: List[float] = field(default_factory=list)
    val_mse: List[float] = field(default_factory=list)
    best_epoch: int = 0
    test_mse: float = float("nan")

    @property
    def test_mse_e3(self) -> float:
        """Test MSE in units of 1e-3."""
        return self.test_mse * 1e3


def train_estimator(
    kind: str,
    dataset: ProfileDataset,
    epochs: int = 5000,
    lr: float = 1e-4,
    fractions: Sequence[float] = (0.6, 0.2, 0.2),
    hidden: int = 32,
    seed: int = 0,
) -> TrainResult:
    """Train a volume profile estimator with full batch Adam.

    The dataset is split chronologically into training, validation and
    test blocks. Parameters with the lowest validation MSE (including the
    initialization) are kept. Linear estimators are solved by least
    squares and moving average estimators have nothing to train.

    Raises:
        EmptyDataset: If any split is empty.
    """
    if len(dataset) == 0:
        raise EmptyDataset("Estimator dataset is empty.")
    train_idx, val_idx, test_idx = chronological_split(len(dataset), fractions)
    train, val, test = (dataset.subset(i) for i in (train_idx, val_idx, test_idx))
    estimator = make_estimator(kind, dataset.inputs.shape[1], hidden, seed)
    result = TrainResult(estimator)
    if kind == "linear":
        estimator.fit_lstsq(train.inputs, train.targets)
        result.train_mse.append(evaluate_mse(estimator, train))
        result.val_mse.append(evaluate_mse(estimator, val))
    elif kind != "ma":
        optimizer = Adam(estimator, lr)
        best = evaluate_mse(estimator, val)
        best_state = estimator.state_dict()
        result.val_mse.append(best)
        for epoch in range(1, epochs + 1):
            pred = estimator.forward(train.inputs)
            loss, grad = mse_loss(pred, train.targets)
            estimator.zero_grad()
            estimator.backward(grad)
            optimizer.step()
            result.train_mse.append(loss)
            mse = evaluate_mse(estimator, val)
            result.val_mse.append(mse)
            if mse < best:
                best, best_state, result.best_epoch = mse, estimator.state_dict(), epoch
        estimator.load_state_dict(best_state)
    result.test_mse = evaluate_mse(estimator, test)
    logger.info(
        "Trained %s estimator: best epoch %d, test MSE %.4fe-3",
        kind,
        result.best_epoch,
        result.test_mse_e3,
    )
    return result


def save_estimator(path: str, estimator: Module):
    """Save an estimator checkpoint."""
    save_checkpoint(
        path,
        {"estimator": estimator},
        kind=np.array(estimator.kind),
        hidden=np.array([getattr(estimator, "hidden", 0)]),
    )


def load_estimator(path: str, n: int = HISTORY_DAYS) -> Module:
    """Load an estimator saved by :func:`save_estimator`.

    Raises:
        CheckpointMissing: If the file does not exist.
    """
    if not os.path.exists(path):
        raise CheckpointMissing(f"Checkpoint {path} does not exist.")
    with np.load(path) as blob:
        kind = str(blob["kind"])
        hidden = int(blob["hidden"][0])
    estimator = make_estimator(kind, n, hidden or 32)
    load_checkpoint(path, {"estimator": estimator})
    return estimator


def allocate(parent: int, profile: VolumeProfile) -> TrancheAllocation:
    """Split a parent order into lot aligned tranches.

    Lots are assigned by the largest remainder method, with ties going to
    the earlier tranche, so the total is preserved exactly.

    Raises:
        NegativeParent: If `parent` is negative or not lot aligned.
    """
    if parent < 0 or parent % LOT:
        raise NegativeParent(f"Parent order of {parent} shares is not a non-negative lot multiple.")
    lots = parent // LOT
    raw = lots * profile.as_array()
    base = np.floor(raw).astype(int)
    short = lots - int(base.sum())
    order = np.argsort(-(raw - base), kind="stable")
    base[order[:short]] += 1
    return TrancheAllocation(tuple(int(v) * LOT for v in base))


def write_profiles_csv(path: str, day_ids: Sequence[str], profiles: np.ndarray):
    """Write a profile dataset as CSV ``day_id,f1..f8``."""
    frame = pd.DataFrame(np.asarray(profiles), columns=PROFILE_COLUMNS[1:])
    frame.insert(0, "day_id", list(day_ids))
    frame.to_csv(path, index=False, lineterminator="\n")


def read_profiles_csv(path: str) -> Tuple[List[str], np.ndarray]:
    """Read a profile dataset written by :func:`write_profiles_csv`.

    Raises:
        MissingFile: If the file does not exist.
        BadHistory: If the columns are wrong or a row is off the simplex.
    """
    if not os.path.exists(path):
        raise MissingFile(path)
    frame = pd.read_csv(path, dtype={"day_id": str})
    if list(frame.columns) != PROFILE_COLUMNS:
        raise BadHistory(f"{path}: expected columns {','.join(PROFILE_COLUMNS)}.")
    profiles = frame[PROFILE_COLUMNS[1:]].to_numpy(dtype=np.float64)
    if not _check_simplex_rows(profiles):
        raise BadHistory(f"{path}: profile rows must lie on the simplex.")
    return frame["day_id"].tolist(), profiles


def write_mse_report(path: str, rows: Sequence[Tuple[str, str, float]]):
    """Write estimator test MSE rows as CSV ``model,stock,test_mse_e-3``."""
    frame = pd.DataFrame(list(rows), columns=["model", "stock", "test_mse_e-3"])
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.6f")
