"""Correlation and causation scoring between commodities and indices.

Causation is a lagged-regression F test: does adding the candidate cause's
lags improve the prediction of the effect beyond the effect's own lags?
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._validation import as_float_vector, check_same_length
from .dataio import MonthlyPanel
from .errors import (
    ConstantInputError,
    SeriesTooShortError,
    SingularRegressionError,
    UnknownCommodityError,
)


def pearson(x, y) -> float:
    x = as_float_vector(x, "x")
    y = as_float_vector(y, "y")
    check_same_length(x, y)
    if len(x) < 3:
        raise SeriesTooShortError("need at least 3 observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise ConstantInputError("pearson is undefined for a constant input")
    r = float(np.dot(dx, dy) / (sx * sy))
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class CausationScore:
    f_stat: float
    p_value: float


def _lag_design(y: np.ndarray, lags: int) -> np.ndarray:
    """Columns y[t-1], ..., y[t-lags] for t = lags..T-1."""
    return np.column_stack([y[lags - k:len(y) - k] for k in range(1, lags + 1)])


def causation_score(cause, effect, lags: int = 3) -> CausationScore:
    """F statistic for "cause's history improves effect's prediction".

    The restricted model regresses effect_t on its own `lags` lags plus an
    intercept; the unrestricted model adds the cause's lags. The statistic
    is ((RSS_r - RSS_u) / lags) / (RSS_u / (T - 2*lags - 1)) with T the
    number of regression rows, and the p-value comes from the matching F
    distribution.
    """
    cause = as_float_vector(cause, "cause")
    effect = as_float_vector(effect, "effect")
    check_same_length(cause, effect, "cause, effect")
    if lags < 1:
        raise ValueError("lags must be >= 1")
    if len(effect) < 5 * lags:
        raise SeriesTooShortError(
            f"need at least {5 * lags} observations for {lags} lags"
        )
    y = effect[lags:]
    n_obs = len(y)
    ones = np.ones((n_obs, 1))
    X_r = np.hstack([ones, _lag_design(effect, lags)])
    X_u = np.hstack([X_r, _lag_design(cause, lags)])
    dfd = n_obs - 2 * lags - 1
    if dfd < 1:
        raise SeriesTooShortError("not enough observations for the F test")

    def rss(X):
        beta, residual, rank, _ = np.linalg.lstsq(X, y, rcond=None)
        if rank < X.shape[1]:
            raise SingularRegressionError("collinear lag design")
        r = y - X @ beta
        return float(r @ r)

    rss_r = rss(X_r)
    rss_u = rss(X_u)
    scale = float(y @ y) + 1.0
    if rss_u <= 1e-12 * scale:
        raise SingularRegressionError("unrestricted model fits exactly; degenerate pair")
    f_stat = max(0.0, (rss_r - rss_u) / lags) / (rss_u / dfd)
    p_value = float(stats.f.sf(f_stat, lags, dfd))
    return CausationScore(f_stat=float(f_stat), p_value=p_value)


@dataclass(frozen=True)
class RelationMatrix:
    """Correlation and causation scores for every (commodity, index) pair."""

    commodities: tuple[str, ...]
    indices: tuple[str, ...]
    correlation: np.ndarray
    causation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "commodities", tuple(self.commodities))
        object.__setattr__(self, "indices", tuple(self.indices))
        shape = (len(self.commodities), len(self.indices))
        if self.correlation.shape != shape or self.causation.shape != shape:
            raise ValueError(f"matrices must have shape {shape}")
        if np.any(np.abs(self.correlation) > 1.0 + 1e-12):
            raise ValueError("correlation entries must lie in [-1, 1]")


def build_relation_matrix(panel: MonthlyPanel, commodities: list[str],
                          indices: list[str], lags: int = 3) -> RelationMatrix:
    corr = np.zeros((len(commodities), len(indices)))
    caus = np.zeros_like(corr)
    for i, com in enumerate(commodities):
        for j, idx in enumerate(indices):
            corr[i, j] = pearson(panel.columns[com], panel.columns[idx])
            caus[i, j] = causation_score(panel.columns[idx], panel.columns[com],
                                         lags=lags).f_stat
    return RelationMatrix(commodities=commodities, indices=indices,
                          correlation=corr, causation=caus)


@dataclass(frozen=True)
class PairingResult:
    commodity: str
    corr_index: str
    corr_value: float
    caus_index: str
    caus_value: float
    merged: bool


def pair_features(matrix: RelationMatrix, commodity: str) -> PairingResult:
    """Select the strongest-|correlation| and strongest-causation indices.

    |correlation| ties break by causation value, then index order; causation
    ties break by index order. When both selections coincide the pairing is
    merged and downstream models use a single feature column.
    """
    try:
        row = matrix.commodities.index(commodity)
    except ValueError:
        raise UnknownCommodityError(commodity) from None
    corr_row = matrix.correlation[row]
    caus_row = matrix.causation[row]

    best_abs = np.max(np.abs(corr_row))
    tied = np.flatnonzero(np.abs(corr_row) == best_abs)
    corr_j = int(tied[np.argmax(caus_row[tied])])  # argmax keeps first on ties

    caus_j = int(np.argmax(caus_row))

    return PairingResult(
        commodity=commodity,
        corr_index=matrix.indices[corr_j],
        corr_value=float(corr_row[corr_j]),
        caus_index=matrix.indices[caus_j],
        caus_value=float(caus_row[caus_j]),
        merged=corr_j == caus_j,
    )


def pair_all(matrix: RelationMatrix) -> list[PairingResult]:
    return [pair_features(matrix, c) for c in matrix.commodities]


# --- exports -----------------------------------------------------------------

def _write_matrix_csv(path, commodities, indices, values) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["commodity"] + list(indices))
        for name, row in zip(commodities, values):
            writer.writerow([name] + [repr(float(v)) for v in row])


def write_relation_csvs(matrix: RelationMatrix, correlation_path, causation_path) -> None:
    _write_matrix_csv(correlation_path, matrix.commodities, matrix.indices,
                      matrix.correlation)
    _write_matrix_csv(causation_path, matrix.commodities, matrix.indices,
                      matrix.causation)


def write_pairing_csv(pairs: list[PairingResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["commodity", "corr_index", "corr_value",
                         "caus_index", "caus_value", "merged"])
        for p in pairs:
            writer.writerow([p.commodity, p.corr_index, repr(p.corr_value),
                             p.caus_index, repr(p.caus_value),
                             str(p.merged).lower()])
