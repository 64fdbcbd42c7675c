"""Normalization, the two-window change signal, and supervised windowing."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import as_float_matrix, as_float_vector
from .dataio import MonthlyPanel
from .errors import (
    ConstantSeriesError,
    InsufficientLengthError,
    SeriesTooShortError,
)


@dataclass(frozen=True)
class ScalerParams:
    """Fitted min-max range of one feature."""

    x_min: float
    x_max: float

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise ConstantSeriesError(
                f"x_max ({self.x_max}) must exceed x_min ({self.x_min})"
            )


def fit_minmax(series) -> ScalerParams:
    x = as_float_vector(series, "series")
    if len(x) < 2:
        raise SeriesTooShortError("need at least 2 observations to fit a scaler")
    lo, hi = float(np.min(x)), float(np.max(x))
    if hi == lo:
        raise ConstantSeriesError(f"series is constant at {lo}")
    return ScalerParams(x_min=lo, x_max=hi)


def transform_minmax(x, params: ScalerParams) -> np.ndarray:
    """(x - x_min) / (x_max - x_min); out-of-range inputs extrapolate."""
    x = np.asarray(x, dtype=np.float64)
    return (x - params.x_min) / (params.x_max - params.x_min)


def inverse_minmax(y, params: ScalerParams) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    return y * (params.x_max - params.x_min) + params.x_min


class MinMaxScaler(TransformerMixin, BaseEstimator):
    """Column-wise min-max scaler for 2-D arrays.

    With ``tolerate_constant=True`` a constant column maps to all zeros
    instead of raising, which is what the model pipelines want for e.g.
    an all-zero outlier-flag column.
    """

    def __init__(self, tolerate_constant: bool = False):
        self.tolerate_constant = tolerate_constant

    def fit(self, X, y=None):
        X = as_float_matrix(X)
        params = []
        for j in range(X.shape[1]):
            lo, hi = float(np.min(X[:, j])), float(np.max(X[:, j]))
            if hi == lo:
                if not self.tolerate_constant:
                    raise ConstantSeriesError(f"column {j} is constant at {lo}")
                hi = lo + 1.0
            params.append(ScalerParams(lo, hi))
        self.params_ = params
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = as_float_matrix(X)
        return np.column_stack(
            [transform_minmax(X[:, j], p) for j, p in enumerate(self.params_)]
        )

    def inverse_transform(self, X):
        X = as_float_matrix(X)
        return np.column_stack(
            [inverse_minmax(X[:, j], p) for j, p in enumerate(self.params_)]
        )


def double_rolling_aggregate(series, window: int = 5) -> np.ndarray:
    """Difference of the means of two adjacent sliding windows.

    out[t] = mean(series[t:t+window]) - mean(series[t-window:t]) wherever
    both windows fit; everything else is NaN. A positive value means the
    series just moved up, so shock direction is preserved.
    """
    x = as_float_vector(series, "series")
    if window < 1:
        raise ValueError("window must be >= 1")
    T = len(x)
    if T < 2 * window:
        raise SeriesTooShortError(f"need at least {2 * window} points, got {T}")
    csum = np.concatenate([[0.0], np.cumsum(x)])
    means = (csum[window:] - csum[:-window]) / window  # means[i] = mean(x[i:i+window])
    out = np.full(T, np.nan)
    out[window:T - window + 1] = means[window:] - means[:T - 2 * window + 1]
    return out


@dataclass(frozen=True)
class WindowedDataset:
    """Sliding supervised windows: inputs (n, L, F) and targets (n, H)."""

    inputs: np.ndarray
    targets: np.ndarray
    lookback: int
    horizon: int
    feature_names: tuple[str, ...]

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets disagree on window count")
        if self.inputs.ndim != 3 or self.inputs.shape[1] != self.lookback:
            raise ValueError(f"inputs must be (n, {self.lookback}, F)")
        if self.targets.ndim != 2 or self.targets.shape[1] != self.horizon:
            raise ValueError(f"targets must be (n, {self.horizon})")
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self) -> int:
        return len(self.inputs)


def window_count(T: int, lookback: int, horizon: int) -> int:
    return T - lookback - horizon + 1


def make_windows(panel: MonthlyPanel, target: str, lookback: int, horizon: int,
                 feature_names: list[str] | None = None) -> WindowedDataset:
    """Stride-1 windows: input t covers rows [t, t+L), target rows [t+L, t+L+H).

    The target column is looked up in the panel; features default to every
    panel column in order.
    """
    if target not in panel.columns:
        raise KeyError(f"target column {target!r} not in panel")
    names = panel.names if feature_names is None else list(feature_names)
    if lookback < 1 or horizon < 1:
        raise ValueError("lookback and horizon must be >= 1")
    T = len(panel)
    n = window_count(T, lookback, horizon)
    if n < 1:
        raise InsufficientLengthError(
            f"panel length {T} cannot fit lookback {lookback} + horizon {horizon}"
        )
    X = panel.matrix(names)
    y = panel.columns[target]
    inputs = np.stack([X[t:t + lookback] for t in range(n)])
    targets = np.stack([y[t + lookback:t + lookback + horizon] for t in range(n)])
    return WindowedDataset(inputs=inputs, targets=targets, lookback=lookback,
                           horizon=horizon, feature_names=names)


def chronological_split(n: int, train_fraction: float = 0.8) -> tuple[slice, slice]:
    """Index ranges for a leakage-free train/test split of n ordered items."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    cut = int(np.floor(n * train_fraction))
    return slice(0, cut), slice(cut, n)


def split_windows(ds: WindowedDataset, n_rows: int, train_fraction: float = 0.8
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Window indices whose target lies fully in the train / test row ranges.

    `n_rows` is the panel length the windows were built from. Windows whose
    target straddles the split boundary belong to neither side.
    """
    cut = int(np.floor(n_rows * train_fraction))
    starts = np.arange(len(ds))
    train = starts[starts + ds.lookback + ds.horizon <= cut]
    test = starts[starts + ds.lookback >= cut]
    return train, test


def write_windows_csv(ds: WindowedDataset, path) -> None:
    """Debug export, one row per (window, step, feature) cell."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["window_id", "row", "feature", "value"])
        for w in range(len(ds)):
            for r in range(ds.lookback):
                for f, name in enumerate(ds.feature_names):
                    writer.writerow([w, r, name, repr(float(ds.inputs[w, r, f]))])
