"""Small input-validation helpers used by the estimators and functions."""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, LengthMismatchError


def as_float_vector(x, name: str = "x", allow_nan: bool = False) -> np.ndarray:
    """Coerce to a 1-D float64 array, rejecting non-finite entries by default."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if not allow_nan and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_float_matrix(X, name: str = "X") -> np.ndarray:
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_same_length(x: np.ndarray, y: np.ndarray, names: str = "x, y") -> None:
    if len(x) != len(y):
        raise LengthMismatchError(f"{names} must have equal length, got {len(x)} and {len(y)}")


def check_n_features(estimator, X: np.ndarray) -> None:
    """Raise DimensionMismatchError when X disagrees with the fitted feature count."""
    expected = getattr(estimator, "n_features_in_", None)
    if expected is not None and X.shape[1] != expected:
        raise DimensionMismatchError(
            f"{type(estimator).__name__} was fitted with {expected} features, "
            f"got {X.shape[1]}"
        )
