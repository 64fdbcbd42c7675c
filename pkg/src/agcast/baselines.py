"""From-scratch regression baselines: linear/polynomial, CART, forest, GBT.

All estimators follow the fit/predict convention, validate feature counts,
and are deterministic under their seed. Split search is greedy squared-error
reduction over midpoints of consecutive sorted unique values; the first
strictly best candidate wins, iterating features in ascending order and
thresholds in ascending order, so results are reproducible and comparable
against an exhaustive search.
"""

from __future__ import annotations

import json
import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from ._validation import as_float_matrix, as_float_vector, check_n_features, \
    check_same_length
from .errors import (
    InsufficientSamplesError,
    InvalidConfigError,
    RankDeficientWarning,
)


# --- shared CART machinery ----------------------------------------------------

class _TreeNode:
    __slots__ = ("feature", "threshold", "left", "right", "value", "n")

    def __init__(self, feature=-1, threshold=0.0, left=None, right=None,
                 value=0.0, n=0):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.value = value
        self.n = n

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


def split_midpoint(a: float, b: float) -> float:
    """Midpoint of two consecutive unique values, never rounding up to b."""
    mid = a + (b - a) / 2.0
    return a if mid >= b else mid


def _best_split(X, y, feature_order, min_leaf):
    """Return (sse, feature, threshold) of the best valid split, or None.

    Prefix sums screen all candidates cheaply; everything within a small
    tolerance of the screened minimum is re-evaluated with the exact naive
    sum so that ties resolve by ascending (feature, threshold) order,
    independent of summation rounding.
    """
    n = len(y)
    tol = 1e-9 * (float(np.sum(y * y)) + 1.0)
    screened = []
    best_approx = None
    for f in feature_order:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        cs1 = np.cumsum(ys)
        cs2 = np.cumsum(ys * ys)
        total1, total2 = cs1[-1], cs2[-1]
        ks = np.arange(1, n)
        valid = (ks >= min_leaf) & (n - ks >= min_leaf) & (xs[:-1] < xs[1:])
        if not valid.any():
            continue
        ks = ks[valid]
        left1, left2 = cs1[ks - 1], cs2[ks - 1]
        sse = (left2 - left1 * left1 / ks) \
            + ((total2 - left2) - (total1 - left1) ** 2 / (n - ks))
        screened.append((f, xs, ks, sse))
        low = float(sse.min())
        if best_approx is None or low < best_approx:
            best_approx = low
    if best_approx is None:
        return None
    best = None
    for f, xs, ks, sse in screened:
        for pos in np.flatnonzero(sse <= best_approx + tol):
            k = int(ks[pos])
            threshold = split_midpoint(float(xs[k - 1]), float(xs[k]))
            mask = X[:, f] <= threshold
            yl, yr = y[mask], y[~mask]
            exact = float(np.sum((yl - yl.mean()) ** 2)
                          + np.sum((yr - yr.mean()) ** 2))
            if best is None or exact < best[0]:
                best = (exact, f, threshold)
    return best


def _build_cart(X, y, max_depth, min_leaf, depth=0, rng=None, max_features=None):
    n = len(y)
    node_sse = float(np.sum((y - y.mean()) ** 2))
    leaf = _TreeNode(value=float(y.mean()), n=n)
    if n < 2 * min_leaf or node_sse == 0.0:
        return leaf
    if max_depth is not None and depth >= max_depth:
        return leaf
    d = X.shape[1]
    if max_features is not None and max_features < d:
        chosen = np.sort(rng.choice(d, size=max_features, replace=False))
    else:
        chosen = np.arange(d)
    best = _best_split(X, y, chosen, min_leaf)
    if best is None or best[0] >= node_sse:
        return leaf
    _, feature, threshold = best
    mask = X[:, feature] <= threshold
    return _TreeNode(
        feature=int(feature), threshold=float(threshold),
        left=_build_cart(X[mask], y[mask], max_depth, min_leaf, depth + 1,
                         rng, max_features),
        right=_build_cart(X[~mask], y[~mask], max_depth, min_leaf, depth + 1,
                          rng, max_features),
        value=float(y.mean()), n=n,
    )


def _tree_predict(node: _TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X))
    for i, x in enumerate(X):
        cur = node
        while not cur.is_leaf:
            cur = cur.left if x[cur.feature] <= cur.threshold else cur.right
        out[i] = cur.value
    return out


def _tree_to_list(node: _TreeNode):
    if node.is_leaf:
        return [node.value, node.n]
    return [node.feature, node.threshold, _tree_to_list(node.left),
            _tree_to_list(node.right), node.value, node.n]


def _tree_from_list(data) -> _TreeNode:
    if len(data) == 2:
        return _TreeNode(value=float(data[0]), n=int(data[1]))
    return _TreeNode(feature=int(data[0]), threshold=float(data[1]),
                     left=_tree_from_list(data[2]), right=_tree_from_list(data[3]),
                     value=float(data[4]), n=int(data[5]))


# --- estimators ----------------------------------------------------------------

class PolynomialRegression(RegressorMixin, BaseEstimator):
    """Least squares on a degree-1 or degree-2 polynomial expansion.

    Solved by normal equations with a tiny ridge; a rank-deficient design
    emits RankDeficientWarning and relies on the ridge for stability.
    """

    def __init__(self, degree: int = 1, ridge: float = 1e-8):
        self.degree = degree
        self.ridge = ridge

    def _expand(self, X: np.ndarray) -> np.ndarray:
        cols = [np.ones(len(X)), *X.T]
        if self.degree == 2:
            d = X.shape[1]
            for i in range(d):
                for j in range(i, d):
                    cols.append(X[:, i] * X[:, j])
        return np.column_stack(cols)

    def fit(self, X, y):
        if self.degree not in (1, 2):
            raise InvalidConfigError("degree must be 1 or 2")
        X = as_float_matrix(X)
        y = as_float_vector(y, "y")
        check_same_length(X, y, "X, y")
        D = self._expand(X)
        if np.linalg.matrix_rank(D) < D.shape[1]:
            warnings.warn("design matrix is rank deficient; ridge fallback applied",
                          RankDeficientWarning)
        A = D.T @ D + self.ridge * np.eye(D.shape[1])
        beta = np.linalg.solve(A, D.T @ y)
        self.intercept_ = float(beta[0])
        self.coef_ = beta[1:]
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        X = as_float_matrix(X)
        check_n_features(self, X)
        D = self._expand(X)
        return D @ np.concatenate([[self.intercept_], self.coef_])

    def to_json_dict(self) -> dict:
        return {"format": "polynomial_regression", "version": 1,
                "degree": self.degree, "ridge": self.ridge,
                "intercept_": self.intercept_, "coef_": self.coef_.tolist(),
                "n_features_in_": self.n_features_in_}

    @classmethod
    def from_json_dict(cls, data: dict) -> "PolynomialRegression":
        model = cls(degree=data["degree"], ridge=data["ridge"])
        model.intercept_ = float(data["intercept_"])
        model.coef_ = np.array(data["coef_"])
        model.n_features_in_ = int(data["n_features_in_"])
        return model


class RegressionTree(RegressorMixin, BaseEstimator):
    """CART with mean leaves and greedy squared-error splits."""

    def __init__(self, max_depth: int | None = None, min_leaf: int = 5):
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, X, y):
        if self.min_leaf < 1:
            raise InvalidConfigError("min_leaf must be >= 1")
        X = as_float_matrix(X)
        y = as_float_vector(y, "y")
        check_same_length(X, y, "X, y")
        if len(y) < 2 * self.min_leaf:
            raise InsufficientSamplesError(
                f"need at least {2 * self.min_leaf} samples, got {len(y)}"
            )
        self.tree_ = _build_cart(X, y, self.max_depth, self.min_leaf)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        X = as_float_matrix(X)
        check_n_features(self, X)
        return _tree_predict(self.tree_, X)

    def to_json_dict(self) -> dict:
        return {"format": "regression_tree", "version": 1,
                "max_depth": self.max_depth, "min_leaf": self.min_leaf,
                "tree": _tree_to_list(self.tree_),
                "n_features_in_": self.n_features_in_}

    @classmethod
    def from_json_dict(cls, data: dict) -> "RegressionTree":
        model = cls(max_depth=data["max_depth"], min_leaf=data["min_leaf"])
        model.tree_ = _tree_from_list(data["tree"])
        model.n_features_in_ = int(data["n_features_in_"])
        return model


class RandomForest(RegressorMixin, BaseEstimator):
    """Bootstrap ensemble of CARTs with per-split feature subsampling.

    feature_subsample defaults to ceil(d / 3). Every tree draws its own
    child seed from the master seed, so the fit does not depend on build
    order.
    """

    def __init__(self, n_trees: int = 100, feature_subsample: int | None = None,
                 min_leaf: int = 5, max_depth: int | None = None,
                 bootstrap: bool = True, seed: int = 0):
        self.n_trees = n_trees
        self.feature_subsample = feature_subsample
        self.min_leaf = min_leaf
        self.max_depth = max_depth
        self.bootstrap = bootstrap
        self.seed = seed

    def fit(self, X, y):
        if self.n_trees < 1:
            raise InvalidConfigError("n_trees must be >= 1")
        X = as_float_matrix(X)
        y = as_float_vector(y, "y")
        check_same_length(X, y, "X, y")
        n, d = X.shape
        if n < 2 * self.min_leaf:
            raise InsufficientSamplesError(
                f"need at least {2 * self.min_leaf} samples, got {n}"
            )
        max_features = self.feature_subsample
        if max_features is None:
            max_features = int(np.ceil(d / 3))
        if not 1 <= max_features <= d:
            raise InvalidConfigError(f"feature_subsample must be in [1, {d}]")
        trees = []
        for child in np.random.SeedSequence(self.seed).spawn(self.n_trees):
            rng = np.random.default_rng(child)
            idx = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            trees.append(_build_cart(X[idx], y[idx], self.max_depth, self.min_leaf,
                                     rng=rng, max_features=max_features))
        self.trees_ = trees
        self.n_features_in_ = d
        return self

    def predict(self, X):
        X = as_float_matrix(X)
        check_n_features(self, X)
        return np.mean([_tree_predict(t, X) for t in self.trees_], axis=0)

    def to_json_dict(self) -> dict:
        return {"format": "random_forest", "version": 1,
                "params": self.get_params(),
                "trees": [_tree_to_list(t) for t in self.trees_],
                "n_features_in_": self.n_features_in_}

    @classmethod
    def from_json_dict(cls, data: dict) -> "RandomForest":
        model = cls(**data["params"])
        model.trees_ = [_tree_from_list(t) for t in data["trees"]]
        model.n_features_in_ = int(data["n_features_in_"])
        return model


class GradientBoosting(RegressorMixin, BaseEstimator):
    """Squared-error gradient boosting over depth-limited CARTs.

    Starts from the target mean and fits each round's tree to the current
    residuals; predictions accumulate learning_rate times each tree. With
    subsample < 1 each round trains on a random row fraction.
    """

    def __init__(self, rounds: int = 100, learning_rate: float = 0.1,
                 max_depth: int = 3, min_leaf: int = 1, subsample: float = 1.0,
                 seed: int = 0):
        self.rounds = rounds
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.subsample = subsample
        self.seed = seed

    def fit(self, X, y):
        if self.rounds < 0:
            raise InvalidConfigError("rounds must be >= 0")
        if self.learning_rate <= 0:
            raise InvalidConfigError("learning_rate must be > 0")
        if self.max_depth < 1:
            raise InvalidConfigError("max_depth must be >= 1")
        if not 0.0 < self.subsample <= 1.0:
            raise InvalidConfigError("subsample must be in (0, 1]")
        X = as_float_matrix(X)
        y = as_float_vector(y, "y")
        check_same_length(X, y, "X, y")
        n = len(y)
        if n < max(2, 2 * self.min_leaf):
            raise InsufficientSamplesError(f"need more samples, got {n}")
        rng = np.random.default_rng(self.seed)
        self.init_ = float(y.mean())
        pred = np.full(n, self.init_)
        trees = []
        trace = [float(np.mean((y - pred) ** 2))]
        for _ in range(self.rounds):
            residual = y - pred
            if self.subsample < 1.0:
                k = max(2 * self.min_leaf, int(np.ceil(self.subsample * n)))
                rows = rng.choice(n, size=min(k, n), replace=False)
            else:
                rows = slice(None)
            tree = _build_cart(X[rows], residual[rows], self.max_depth, self.min_leaf)
            trees.append(tree)
            pred = pred + self.learning_rate * _tree_predict(tree, X)
            trace.append(float(np.mean((y - pred) ** 2)))
        self.trees_ = trees
        self.loss_trace_ = trace
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        X = as_float_matrix(X)
        check_n_features(self, X)
        pred = np.full(len(X), self.init_)
        for tree in self.trees_:
            pred += self.learning_rate * _tree_predict(tree, X)
        return pred

    def to_json_dict(self) -> dict:
        return {"format": "gradient_boosting", "version": 1,
                "params": self.get_params(), "init_": self.init_,
                "trees": [_tree_to_list(t) for t in self.trees_],
                "n_features_in_": self.n_features_in_}

    @classmethod
    def from_json_dict(cls, data: dict) -> "GradientBoosting":
        model = cls(**data["params"])
        model.init_ = float(data["init_"])
        model.trees_ = [_tree_from_list(t) for t in data["trees"]]
        model.loss_trace_ = []
        model.n_features_in_ = int(data["n_features_in_"])
        return model


def save_model_json(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json_dict(), fh)


_FORMATS = {
    "polynomial_regression": PolynomialRegression,
    "regression_tree": RegressionTree,
    "random_forest": RandomForest,
    "gradient_boosting": GradientBoosting,
}


def load_model_json(path):
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    cls = _FORMATS.get(data.get("format"))
    if cls is None:
        raise InvalidConfigError(f"unknown model format {data.get('format')!r}")
    return cls.from_json_dict(data)
