"""IQR contamination estimation and a from-scratch isolation forest.

Anomaly scores follow s(x, m) = 2 ** (-E[h(x)] / c(m)) where h(x) is the
path length of x through each random partition tree, leaves holding k > 1
points contribute an extra c(k), and c(m) is the expected unsuccessful
search length of a random binary search tree that isolates m points.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ._validation import as_float_matrix, as_float_vector
from .errors import (
    DimensionMismatchError,
    InvalidConfigError,
    TooFewPointsError,
)

EULER_GAMMA = float(np.euler_gamma)


# --- quartiles and contamination --------------------------------------------

@dataclass(frozen=True)
class QuartileSummary:
    q1: float
    q3: float

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def quartiles(series) -> QuartileSummary:
    """25th/75th percentiles with the linear (n-1)*p interpolation rule."""
    x = as_float_vector(series, "series")
    if len(x) < 4:
        raise TooFewPointsError(f"need at least 4 points, got {len(x)}")
    q1, q3 = np.percentile(x, [25.0, 75.0])
    return QuartileSummary(q1=float(q1), q3=float(q3))


def contamination_from_iqr(change_signal, fence_k: float = 1.5) -> float:
    """Fraction of the signal outside the Tukey fences, clamped to [0.001, 0.5].

    NaN entries (undefined edges of the change signal) are ignored.
    """
    x = np.asarray(change_signal, dtype=np.float64)
    x = x[np.isfinite(x)]
    q = quartiles(x)
    lo = q.q1 - fence_k * q.iqr
    hi = q.q3 + fence_k * q.iqr
    frac = float(np.mean((x < lo) | (x > hi)))
    return float(min(0.5, max(0.001, frac)))


# --- path-length normalizer --------------------------------------------------

def expected_bst_path_length(m: int) -> float:
    """c(m): average unsuccessful-search path length of a random BST.

    Isolating m points takes m - 1 internal splits, the structure of a
    binary search tree on m - 1 keys, whose mean external-node depth is
    2*H(m-1) - 2*(m-1)/m. Harmonic numbers are exact (via digamma), which
    keeps the value honest for small m.
    """
    if m <= 1:
        return 0.0
    if m == 2:
        return 1.0
    h = float(digamma(m)) + EULER_GAMMA  # H(m-1), exact
    return 2.0 * h - 2.0 * (m - 1) / m


def anomaly_score_from_mean_path(mean_path: float, m: int) -> float:
    """Map an average path length to the (0, 1) anomaly score."""
    c = expected_bst_path_length(m)
    if c <= 0.0:
        return 0.5
    return float(2.0 ** (-mean_path / c))


# --- isolation trees ----------------------------------------------------------

class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "size")

    def __init__(self, feature=-1, threshold=0.0, left=None, right=None, size=0):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.size = size

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


def _build_tree(X: np.ndarray, rng: np.random.Generator, height_limit: int,
                depth: int = 0) -> _Node:
    n = X.shape[0]
    if n <= 1 or depth >= height_limit:
        return _Node(size=n)
    mins = X.min(axis=0)
    maxs = X.max(axis=0)
    usable = np.flatnonzero(maxs > mins)
    if usable.size == 0:
        return _Node(size=n)
    feature = int(usable[rng.integers(usable.size)])
    lo, hi = float(mins[feature]), float(maxs[feature])
    threshold = float(rng.uniform(lo, hi))
    while not lo < threshold < hi:  # enforce a strictly interior split
        threshold = float(rng.uniform(lo, hi))
    mask = X[:, feature] < threshold
    return _Node(
        feature=feature,
        threshold=threshold,
        left=_build_tree(X[mask], rng, height_limit, depth + 1),
        right=_build_tree(X[~mask], rng, height_limit, depth + 1),
        size=n,
    )


def _path_length(node: _Node, x: np.ndarray) -> float:
    depth = 0
    while not node.is_leaf:
        node = node.left if x[node.feature] < node.threshold else node.right
        depth += 1
    return depth + expected_bst_path_length(node.size)


def _node_to_list(node: _Node):
    if node.is_leaf:
        return [node.size]
    return [node.feature, node.threshold, _node_to_list(node.left),
            _node_to_list(node.right), node.size]


def _node_from_list(data) -> _Node:
    if len(data) == 1:
        return _Node(size=int(data[0]))
    return _Node(feature=int(data[0]), threshold=float(data[1]),
                 left=_node_from_list(data[2]), right=_node_from_list(data[3]),
                 size=int(data[4]))


# --- the detector -------------------------------------------------------------

class IsolationForestDetector(BaseEstimator):
    """Random-partition ensemble scoring how easily each point isolates.

    Parameters
    ----------
    n_trees : ensemble size.
    subsample_size : points per tree; None means min(256, n). Each tree's
        height limit is ceil(log2(m)).
    contamination : expected outlier fraction in (0, 0.5]; the score
        threshold is the (1 - contamination) quantile of training scores.
    seed : master seed; every tree derives its own child seed, so serial
        and parallel builds would agree bit for bit.

    Ties at the threshold are not flagged, keeping the training flag rate
    at or below the contamination rate.
    """

    def __init__(self, n_trees: int = 100, subsample_size: int | None = None,
                 contamination: float = 0.05, seed: int = 0):
        self.n_trees = n_trees
        self.subsample_size = subsample_size
        self.contamination = contamination
        self.seed = seed

    def _check_config(self, n: int) -> int:
        if self.n_trees < 1:
            raise InvalidConfigError("n_trees must be >= 1")
        if not 0.0 < self.contamination <= 0.5:
            raise InvalidConfigError("contamination must be in (0, 0.5]")
        m = min(256, n) if self.subsample_size is None else int(self.subsample_size)
        if m < 2:
            raise InvalidConfigError("subsample_size must be >= 2")
        return min(m, n)

    def fit(self, X, y=None):
        X = as_float_matrix(X)
        n = X.shape[0]
        if n < 8:
            raise InvalidConfigError(f"need at least 8 samples, got {n}")
        m = self._check_config(n)
        height_limit = int(np.ceil(np.log2(m)))
        children = np.random.SeedSequence(self.seed).spawn(self.n_trees)
        trees = []
        for child in children:
            rng = np.random.default_rng(child)
            idx = rng.choice(n, size=m, replace=False)
            trees.append(_build_tree(X[idx], rng, height_limit))
        self.trees_ = trees
        self.subsample_size_ = m
        self.n_features_in_ = X.shape[1]
        scores = self.score_samples(X)
        self.threshold_ = float(np.quantile(scores, 1.0 - self.contamination))
        return self

    def _check_fitted(self):
        if not hasattr(self, "trees_"):
            raise NotFittedError("detector is not fitted; call fit first")

    def score_samples(self, X) -> np.ndarray:
        """Anomaly scores in (0, 1); larger means easier to isolate."""
        self._check_fitted()
        X = as_float_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatchError(
                f"fitted with {self.n_features_in_} features, got {X.shape[1]}"
            )
        c = expected_bst_path_length(self.subsample_size_)
        scores = np.empty(X.shape[0])
        for i, x in enumerate(X):
            mean_path = sum(_path_length(t, x) for t in self.trees_) / len(self.trees_)
            scores[i] = 2.0 ** (-mean_path / c)
        return scores

    def anomaly_score(self, x) -> float:
        """Score a single d-vector."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        return float(self.score_samples(x.reshape(1, -1))[0])

    def predict(self, X) -> np.ndarray:
        """Binary flags: 1 where score strictly exceeds the fitted threshold."""
        return (self.score_samples(X) > self.threshold_).astype(np.int8)

    # --- persistence ---------------------------------------------------------

    def to_json_dict(self) -> dict:
        self._check_fitted()
        return {
            "format": "isolation_forest",
            "version": 1,
            "params": {
                "n_trees": self.n_trees,
                "subsample_size": self.subsample_size,
                "contamination": self.contamination,
                "seed": self.seed,
            },
            "subsample_size_": self.subsample_size_,
            "n_features_in_": self.n_features_in_,
            "threshold_": self.threshold_,
            "trees": [_node_to_list(t) for t in self.trees_],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "IsolationForestDetector":
        if data.get("format") != "isolation_forest" or data.get("version") != 1:
            raise InvalidConfigError("unsupported isolation forest payload")
        det = cls(**data["params"])
        det.trees_ = [_node_from_list(t) for t in data["trees"]]
        det.subsample_size_ = int(data["subsample_size_"])
        det.n_features_in_ = int(data["n_features_in_"])
        det.threshold_ = float(data["threshold_"])
        return det

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path) -> "IsolationForestDetector":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


# --- month-level flagging ------------------------------------------------------

@dataclass(frozen=True)
class OutlierFlags:
    """Per-month anomaly scores and binary flags for one series."""

    months: tuple[dt.date, ...]
    scores: np.ndarray  # NaN where the change signal is undefined
    flags: np.ndarray
    threshold: float
    contamination: float

    def __post_init__(self):
        object.__setattr__(self, "months", tuple(self.months))
        if not (len(self.months) == len(self.scores) == len(self.flags)):
            raise ValueError("months, scores, and flags must align")


def flag_series(detector: IsolationForestDetector, signal, months) -> OutlierFlags:
    """Score a 1-D change signal month by month.

    NaN positions (where the signal is undefined) get flag 0 and a missing
    score.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1:
        raise DimensionMismatchError("signal must be 1-D")
    if detector.n_features_in_ != 1:
        raise DimensionMismatchError("detector was not fitted on a 1-D feature space")
    defined = np.isfinite(signal)
    scores = np.full(len(signal), np.nan)
    flags = np.zeros(len(signal), dtype=np.int8)
    if defined.any():
        s = detector.score_samples(signal[defined].reshape(-1, 1))
        scores[defined] = s
        flags[defined] = (s > detector.threshold_).astype(np.int8)
    return OutlierFlags(months=tuple(months), scores=scores, flags=flags,
                        threshold=detector.threshold_,
                        contamination=detector.contamination)


def write_flags_csv(flags: OutlierFlags, path) -> None:
    """month,score,flag rows; missing scores are left empty."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["month", "score", "flag"])
        for m, s, f in zip(flags.months, flags.scores, flags.flags):
            writer.writerow([m.isoformat(), "" if np.isnan(s) else repr(float(s)),
                             int(f)])
