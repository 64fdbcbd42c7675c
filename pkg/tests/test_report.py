import json
import math

import numpy as np
import pytest

from agcast.errors import (
    CommoditySetMismatchError,
    ConstantTargetError,
    EmptyDatasetError,
    LengthMismatchError,
)
from agcast.report import (
    EvalReport,
    EvalRow,
    build_comparison,
    merge_reports,
    r2,
    rmse,
    write_forecast_csv,
    write_report_json,
    write_table5_csv,
    write_table6_csv,
)


class TestRmse:
    def test_perfect_prediction(self):
        y = np.array([1.0, 2.0, 3.0])
        assert rmse(y, y) == 0.0

    def test_constant_offset(self):
        y = np.array([1.0, 2.0, 3.0])
        assert rmse(y + 1, y) == pytest.approx(1.0)

    def test_hand_evaluated(self):
        assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(math.sqrt(12.5))

    def test_errors(self):
        with pytest.raises(LengthMismatchError):
            rmse([1.0], [1.0, 2.0])
        with pytest.raises(EmptyDatasetError):
            rmse([], [])


class TestR2:
    def test_perfect_prediction(self):
        y = np.array([1.0, 2.0, 5.0])
        assert r2(y, y) == 1.0

    def test_mean_predictor_is_zero(self):
        rng = np.random.default_rng(0)
        y = rng.normal(size=50)
        y_hat = np.full(50, y.mean())
        assert abs(r2(y_hat, y)) <= 1e-12

    def test_hand_evaluated_negative(self):
        assert r2([3.0, 2.0, 1.0], [1.0, 2.0, 3.0]) == pytest.approx(-3.0)

    def test_constant_target(self):
        with pytest.raises(ConstantTargetError):
            r2([1.0, 2.0], [5.0, 5.0])

    def test_r2_one_iff_rmse_zero(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            y = rng.normal(size=12)
            y_hat = y + rng.choice([0.0, 1e-3]) * rng.normal(size=12)
            assert (r2(y_hat, y) == 1.0) == (rmse(y_hat, y) == 0.0)


def report_for(metrics: dict, variants: tuple) -> EvalReport:
    """metrics: {commodity: {variant: rmse}}"""
    rows = []
    for commodity, per_variant in metrics.items():
        for variant in variants:
            rows.append(EvalRow(commodity=commodity, variant=variant,
                                rmse=per_variant[variant], r2=0.5,
                                prediction_last=1.0, paired_indices=("a",)))
    return EvalReport(rows=tuple(rows))


class TestEvalReport:
    def test_round_trip(self):
        report = EvalReport(
            rows=(EvalRow("milk", "lstm_with", 0.25, None, 3.5, ("dow", "gold")),
                  EvalRow("milk", "linear", 0.5, -0.1, 4.0, ("dow",))),
            metadata={"seed": 7},
        )
        back = EvalReport.from_json_dict(
            json.loads(json.dumps(report.to_json_dict())))
        assert back == report

    def test_merge_requires_same_commodities(self):
        a = report_for({"milk": {"linear": 0.5}}, ("linear",))
        b = report_for({"veal": {"lstm_with": 0.2}}, ("lstm_with",))
        with pytest.raises(CommoditySetMismatchError):
            merge_reports([a, b])


def fragments_for(table):
    """table: {commodity: (baseline_rmse, with_rmse, without_rmse)}"""
    baseline = report_for({c: {"linear": v[0]} for c, v in table.items()},
                          ("linear",))
    lstm = report_for(
        {c: {"lstm_with": v[1], "lstm_without": v[2]} for c, v in table.items()},
        ("lstm_with", "lstm_without"))
    return [baseline, lstm]


class TestBuildComparison:
    def test_identical_metrics_tie(self):
        comparison = build_comparison(fragments_for({"milk": (0.3, 0.3, 0.3)}))
        assert comparison.rows[0].winner == "tie"
        assert comparison.n_lstm_better == 0

    def test_three_commodity_hand_tally(self):
        table = {
            "milk": (0.30, 0.10, 0.20),   # lstm_with wins
            "veal": (0.05, 0.50, 0.40),   # baseline wins
            "eggs": (0.30, 0.25, 0.10),   # lstm_without wins
        }
        comparison = build_comparison(fragments_for(table))
        winners = {row.commodity: row.winner for row in comparison.rows}
        assert winners == {"milk": "lstm_with", "veal": "baseline",
                           "eggs": "lstm_without"}
        assert comparison.n_lstm_better == 2
        assert comparison.winner_counts == {"lstm_with": 1, "baseline": 1,
                                            "lstm_without": 1}

    def test_missing_commodity_in_fragment(self):
        table = {"milk": (0.3, 0.1, 0.2), "veal": (0.1, 0.2, 0.3)}
        baseline, lstm = fragments_for(table)
        short = EvalReport(rows=tuple(r for r in lstm.rows
                                      if r.commodity != "veal"))
        with pytest.raises(CommoditySetMismatchError):
            build_comparison([baseline, short])

    def test_missing_variant(self):
        baseline, lstm = fragments_for({"milk": (0.3, 0.1, 0.2)})
        without_only = EvalReport(rows=tuple(r for r in lstm.rows
                                             if r.variant != "lstm_with"))
        with pytest.raises(CommoditySetMismatchError):
            build_comparison([baseline, without_only])

    def test_winner_invariant_under_increasing_transform(self):
        rng = np.random.default_rng(2)
        table = {f"c{i}": tuple(rng.uniform(0.01, 1.0, size=3)) for i in range(8)}
        base = build_comparison(fragments_for(table))
        squared = {c: tuple(v ** 2 for v in vals) for c, vals in table.items()}
        transformed = build_comparison(fragments_for(squared))
        for r1, r2_ in zip(base.rows, transformed.rows):
            assert r1.winner == r2_.winner
        assert base.n_lstm_better == transformed.n_lstm_better

    def test_best_baseline_selected_per_commodity(self):
        baseline = report_for({"milk": {"linear": 0.5, "gbt": 0.2}},
                              ("linear", "gbt"))
        lstm = report_for({"milk": {"lstm_with": 0.3, "lstm_without": 0.4}},
                          ("lstm_with", "lstm_without"))
        comparison = build_comparison([baseline, lstm])
        assert comparison.rows[0].baseline_model == "gbt"
        assert comparison.rows[0].baseline_rmse == 0.2
        assert comparison.rows[0].winner == "baseline"


class TestFileEmission:
    def make_reports(self):
        fragments = fragments_for({"milk": (0.3, 0.1, 0.2),
                                   "veal": (0.1, 0.2, 0.3)})
        merged = merge_reports(fragments)
        return merged, build_comparison(fragments)

    def test_table5(self, tmp_path):
        merged, _ = self.make_reports()
        path = tmp_path / "table5.csv"
        write_table5_csv(merged, path)
        lines = path.read_text().splitlines()
        assert lines[0] == \
            "commodity,rmse_with,prediction_with,rmse_without,prediction_without"
        assert len(lines) == 3  # one row per commodity, 4 data points each

    def test_table6(self, tmp_path):
        _, comparison = self.make_reports()
        path = tmp_path / "table6.csv"
        write_table6_csv(comparison, path)
        lines = path.read_text().splitlines()
        assert lines[0] == ("commodity,baseline_model,baseline_rmse,"
                            "lstm_with_rmse,lstm_without_rmse,winner")
        assert lines[1].startswith("milk,linear,")

    def test_report_json(self, tmp_path):
        merged, comparison = self.make_reports()
        path = tmp_path / "report.json"
        write_report_json(merged, comparison, path)
        payload = json.loads(path.read_text())
        assert payload["format"] == "eval_report"
        assert payload["comparison"]["n_lstm_better"] == 1
        back = EvalReport.from_json_dict(payload)
        assert back == merged

    def test_forecast_csv(self, tmp_path):
        import datetime as dt

        from agcast.dataio import month_range

        months = month_range(dt.date(2000, 1, 1), 5)
        fitted = np.array([np.nan, np.nan, 1.0, 2.0, 3.0])
        future = month_range(dt.date(2000, 6, 1), 2)
        path = tmp_path / "forecast.csv"
        write_forecast_csv(path, months, np.arange(5.0), fitted, future,
                           [9.0, 9.5], [8.0, 8.5])
        lines = path.read_text().splitlines()
        assert lines[0] == "month,actual,fitted,forecast_with,forecast_without"
        assert lines[1] == "2000-01-01,0.0,,,"
        assert lines[3] == "2000-03-01,2.0,1.0,,"
        assert lines[6] == "2000-06-01,,,9.0,8.0"
        assert len(lines) == 8
