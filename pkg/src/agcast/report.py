"""Evaluation metrics, the comparison tables, and plot-data exports."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import as_float_vector, check_same_length
from .errors import (
    CommoditySetMismatchError,
    ConstantTargetError,
    EmptyDatasetError,
)

LSTM_WITH = "lstm_with"
LSTM_WITHOUT = "lstm_without"


def rmse(y_hat, y) -> float:
    """sqrt(mean((y_hat - y)^2))."""
    y_hat = as_float_vector(y_hat, "y_hat")
    y = as_float_vector(y, "y")
    check_same_length(y_hat, y, "y_hat, y")
    if len(y) == 0:
        raise EmptyDatasetError("rmse of empty vectors is undefined")
    return float(np.sqrt(np.mean((y_hat - y) ** 2)))


def r2(y_hat, y) -> float:
    """1 - SS_RES / SS_TOT; can go negative for fits worse than the mean."""
    y_hat = as_float_vector(y_hat, "y_hat")
    y = as_float_vector(y, "y")
    check_same_length(y_hat, y, "y_hat, y")
    if len(y) < 2:
        raise EmptyDatasetError("r2 needs at least 2 observations")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ConstantTargetError("r2 is undefined for a constant target")
    ss_res = float(np.sum((y - y_hat) ** 2))
    return 1.0 - ss_res / ss_tot


@dataclass(frozen=True)
class EvalRow:
    """Metrics for one (commodity, model-variant) pair."""

    commodity: str
    variant: str
    rmse: float
    r2: float | None
    prediction_last: float
    paired_indices: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "paired_indices", tuple(self.paired_indices))
        if self.rmse < 0:
            raise ValueError("rmse must be non-negative")
        if self.r2 is not None and self.r2 > 1.0 + 1e-12:
            raise ValueError("r2 cannot exceed 1")


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[EvalRow, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))

    def commodities(self) -> list[str]:
        seen: dict[str, None] = {}
        for row in self.rows:
            seen.setdefault(row.commodity, None)
        return list(seen)

    def variants(self) -> set[str]:
        return {row.variant for row in self.rows}

    def lookup(self, commodity: str, variant: str) -> EvalRow:
        for row in self.rows:
            if row.commodity == commodity and row.variant == variant:
                return row
        raise KeyError((commodity, variant))

    def to_json_dict(self) -> dict:
        return {"format": "eval_report", "version": 1,
                "rows": [asdict(r) | {"paired_indices": list(r.paired_indices)}
                         for r in self.rows],
                "metadata": self.metadata}

    @classmethod
    def from_json_dict(cls, data: dict) -> "EvalReport":
        rows = tuple(EvalRow(commodity=r["commodity"], variant=r["variant"],
                             rmse=r["rmse"], r2=r["r2"],
                             prediction_last=r["prediction_last"],
                             paired_indices=tuple(r["paired_indices"]))
                     for r in data["rows"])
        return cls(rows=rows, metadata=data.get("metadata", {}))


@dataclass(frozen=True)
class ComparisonRow:
    """One commodity's best baseline against both forecaster variants."""

    commodity: str
    baseline_model: str
    baseline_rmse: float
    lstm_with_rmse: float
    lstm_without_rmse: float
    winner: str  # baseline | lstm_with | lstm_without | tie


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[ComparisonRow, ...]
    n_lstm_better: int
    winner_counts: dict


def merge_reports(fragments: list[EvalReport]) -> EvalReport:
    """Union of fragment rows; every fragment must cover the same commodities."""
    if not fragments:
        raise EmptyDatasetError("no report fragments to merge")
    base = set(fragments[0].commodities())
    for frag in fragments[1:]:
        if set(frag.commodities()) != base:
            raise CommoditySetMismatchError(
                f"fragments disagree on commodities: {sorted(base)} vs "
                f"{sorted(frag.commodities())}"
            )
    rows: list[EvalRow] = []
    metadata: dict = {}
    for frag in fragments:
        rows.extend(frag.rows)
        metadata.update(frag.metadata)
    return EvalReport(rows=tuple(rows), metadata=metadata)


def build_comparison(fragments: list[EvalReport]) -> ComparisonReport:
    """Best-baseline vs with/without-outlier forecaster RMSE per commodity.

    The winner is the smallest RMSE; exact ties are flagged as "tie". The
    summary counts how many commodities the forecaster (either variant)
    beat the best baseline on.
    """
    report = merge_reports(fragments)
    variants = report.variants()
    for needed in (LSTM_WITH, LSTM_WITHOUT):
        if needed not in variants:
            raise CommoditySetMismatchError(f"missing variant {needed!r}")
    baseline_variants = sorted(v for v in variants if not v.startswith("lstm"))
    if not baseline_variants:
        raise CommoditySetMismatchError("no baseline variants present")
    rows = []
    n_lstm_better = 0
    winner_counts: dict[str, int] = {}
    for commodity in report.commodities():
        best_model, best_rmse = min(
            ((v, report.lookup(commodity, v).rmse) for v in baseline_variants),
            key=lambda mv: mv[1],
        )
        with_rmse = report.lookup(commodity, LSTM_WITH).rmse
        without_rmse = report.lookup(commodity, LSTM_WITHOUT).rmse
        candidates = {"baseline": best_rmse, LSTM_WITH: with_rmse,
                      LSTM_WITHOUT: without_rmse}
        low = min(candidates.values())
        winners = [k for k, v in candidates.items() if v == low]
        winner = winners[0] if len(winners) == 1 else "tie"
        winner_counts[winner] = winner_counts.get(winner, 0) + 1
        if min(with_rmse, without_rmse) < best_rmse:
            n_lstm_better += 1
        rows.append(ComparisonRow(commodity=commodity, baseline_model=best_model,
                                  baseline_rmse=best_rmse,
                                  lstm_with_rmse=with_rmse,
                                  lstm_without_rmse=without_rmse, winner=winner))
    return ComparisonReport(rows=tuple(rows), n_lstm_better=n_lstm_better,
                            winner_counts=winner_counts)


# --- file emission -------------------------------------------------------------

def write_report_json(report: EvalReport, comparison: ComparisonReport, path) -> None:
    payload = report.to_json_dict()
    payload["comparison"] = {
        "rows": [asdict(r) for r in comparison.rows],
        "n_lstm_better": comparison.n_lstm_better,
        "winner_counts": comparison.winner_counts,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)


def write_table5_csv(report: EvalReport, path) -> None:
    """Per commodity: RMSE and final prediction for both variants."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["commodity", "rmse_with", "prediction_with",
                         "rmse_without", "prediction_without"])
        for commodity in report.commodities():
            w = report.lookup(commodity, LSTM_WITH)
            wo = report.lookup(commodity, LSTM_WITHOUT)
            writer.writerow([commodity, repr(w.rmse), repr(w.prediction_last),
                             repr(wo.rmse), repr(wo.prediction_last)])


def write_table6_csv(comparison: ComparisonReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["commodity", "baseline_model", "baseline_rmse",
                         "lstm_with_rmse", "lstm_without_rmse", "winner"])
        for row in comparison.rows:
            writer.writerow([row.commodity, row.baseline_model,
                             repr(row.baseline_rmse), repr(row.lstm_with_rmse),
                             repr(row.lstm_without_rmse), row.winner])


def write_forecast_csv(path, history_months, actual, fitted,
                       forecast_months, forecast_with, forecast_without) -> None:
    """Plot data: observed history with fitted values, then the two forecasts.

    `fitted` must align with `history_months`; NaN cells are written empty.
    The forecast columns populate only future months.
    """
    if not (len(history_months) == len(actual) == len(fitted)):
        raise EmptyDatasetError("history months, actual, and fitted must align")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["month", "actual", "fitted", "forecast_with",
                         "forecast_without"])
        for k, m in enumerate(history_months):
            f = float(fitted[k])
            fit_cell = "" if np.isnan(f) else repr(f)
            writer.writerow([m.isoformat(), repr(float(actual[k])), fit_cell, "", ""])
        for k, m in enumerate(forecast_months):
            writer.writerow([m.isoformat(), "", "",
                             repr(float(forecast_with[k])),
                             repr(float(forecast_without[k]))])
