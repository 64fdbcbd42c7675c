"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the criterion lines
as they complete.
"""

import datetime as dt
import functools
import math
import time

import numpy as np
import pytest

from agcast import pipeline
from agcast.baselines import RegressionTree
from agcast.dataio import (
    MonthlyPanel,
    SyntheticSpec,
    generate_linked_panel,
    generate_synthetic,
    month_range,
    monthly_to_business_daily,
    write_series_csv,
)
from agcast.lstm import (
    LstmCellParams,
    LstmForecaster,
    LstmState,
    backward_batch,
    cell_forward,
    forward_batch,
    init_parameters,
    mse_loss_and_grad,
)
from agcast.outliers import (
    IsolationForestDetector,
    contamination_from_iqr,
    expected_bst_path_length,
    flag_series,
)
from agcast.preprocess import double_rolling_aggregate, make_windows, split_windows
from agcast.report import (
    EvalReport,
    EvalRow,
    build_comparison,
    r2,
    rmse,
    write_table6_csv,
)

from oracles import (
    exhaustive_cart,
    mean_unsuccessful_search_length,
    scalar_cell_forward,
    tree_to_tuples,
)


def criterion(number, name):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"criterion {number:02d} ({name}): FAIL")
                raise
            print(f"criterion {number:02d} ({name}): PASS")
        return wrapper
    return decorate


@criterion(1, "LSTM gradient check")
def test_gradient_check_against_central_differences():
    start = time.time()
    params = init_parameters(hidden_size=2, input_size=2, output_size=2,
                             rng=np.random.default_rng(11))
    rng = np.random.default_rng(4)
    X = rng.normal(size=(4, 3, 2))  # L=3, F=2
    y = rng.normal(size=(4, 2))
    pred, cache = forward_batch(params, X)
    _, d_pred = mse_loss_and_grad(pred, y)
    analytic = backward_batch(params, cache, d_pred)
    eps = 1e-5
    worst = 0.0
    for key, value in params.items():
        flat = value.ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            lp, _ = mse_loss_and_grad(forward_batch(params, X)[0], y)
            flat[idx] = orig - eps
            lm, _ = mse_loss_and_grad(forward_batch(params, X)[0], y)
            flat[idx] = orig
            numeric = (lp - lm) / (2 * eps)
            a = analytic[key].ravel()[idx]
            worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric), 1e-8))
    assert worst < 1e-4, f"max relative gradient error {worst:.2e}"
    assert time.time() - start < 5.0


@criterion(2, "LSTM cell scalar oracle")
def test_cell_forward_matches_scalar_oracle():
    for case in range(100):
        rng = np.random.default_rng(case)
        hidden = int(rng.integers(1, 4))
        inputs = int(rng.integers(1, 4))
        weights = {}
        for g in ("i", "f", "o", "c"):
            weights[f"w_{g}"] = rng.normal(size=(hidden, hidden + inputs))
            weights[f"b_{g}"] = rng.normal(size=hidden)
        params = LstmCellParams(**{k: np.array(v) for k, v in weights.items()})
        x = rng.normal(size=inputs)
        h_prev = rng.uniform(-0.9, 0.9, size=hidden)
        c_prev = rng.normal(size=hidden)
        state, gates = cell_forward(params, x, LstmState(h=h_prev, c=c_prev))
        oh, oc, ogates = scalar_cell_forward(
            {k: v.tolist() for k, v in weights.items()}, x.tolist(),
            h_prev.tolist(), c_prev.tolist())
        assert np.allclose(state.h, oh, atol=1e-12, rtol=0)
        assert np.allclose(state.c, oc, atol=1e-12, rtol=0)
        for name in ("i", "f", "o", "c_tilde"):
            assert np.allclose(gates[name], ogates[name], atol=1e-12, rtol=0)


@criterion(3, "isolation forest recall and IQR contamination")
def test_injected_shock_recall_and_gaussian_contamination():
    recalls = []
    for seed in range(10):
        rng = np.random.default_rng(900 + seed)
        base = np.array([60, 150, 240, 330, 420])
        shocks = tuple(int(m + rng.integers(-10, 11)) for m in base)
        ts = generate_synthetic(SyntheticSpec(
            n_months=500, seed=seed, trend=0.05, seasonal_amplitude=1.0,
            noise_std=1.0, shock_months=shocks, shock_magnitude=8.0))
        signal = double_rolling_aggregate(ts.values, window=1)
        contamination = contamination_from_iqr(signal)
        detector = IsolationForestDetector(contamination=contamination,
                                           seed=seed).fit(
            signal[np.isfinite(signal)].reshape(-1, 1))
        flags = flag_series(detector, signal, ts.dates)
        flagged = {i for i, f in enumerate(flags.flags) if f}
        recalls.append(len(flagged & set(shocks)) / len(shocks))
    assert np.mean(recalls) >= 0.9, f"mean recall {np.mean(recalls):.2f}"

    gauss = np.random.default_rng(42).standard_normal(100_000)
    assert contamination_from_iqr(gauss) == pytest.approx(0.007, abs=0.002)


@criterion(4, "path-length normalizer vs random BSTs")
def test_c_m_matches_bst_simulation():
    for m in (4, 16, 64):
        simulated = mean_unsuccessful_search_length(m, n_sims=10_000, seed=m)
        analytic = expected_bst_path_length(m)
        assert analytic == pytest.approx(simulated, rel=0.05), \
            f"c({m}) = {analytic:.4f} vs simulated {simulated:.4f}"


@criterion(5, "CART matches exhaustive split search")
def test_tree_oracle_equivalence():
    rng = np.random.default_rng(99)
    checked = 0
    for n in range(2, 13):
        for d in (1, 2):
            for _ in range(10):
                X = rng.normal(size=(n, d))
                y = rng.normal(size=n)
                model = RegressionTree(min_leaf=1).fit(X, y)
                assert tree_to_tuples(model.tree_) == \
                    exhaustive_cart(X, y, min_leaf=1)
                checked += 1
    assert checked == 11 * 2 * 10


@criterion(6, "metric identities")
def test_metric_identities():
    y = np.array([1.0, 2.0, 3.0])
    assert rmse(y, y) == 0.0
    assert rmse(y + 1, y) == pytest.approx(1.0)
    assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(math.sqrt(12.5))
    assert r2(y, y) == 1.0
    assert r2([3.0, 2.0, 1.0], [1.0, 2.0, 3.0]) == pytest.approx(-3.0)
    rng = np.random.default_rng(0)
    target = rng.normal(size=100)
    assert abs(r2(np.full(100, target.mean()), target)) <= 1e-12


@criterion(7, "causation-score null calibration")
def test_granger_null_calibration_and_power():
    from agcast.relations import causation_score

    rejections = 0
    seeds = 200
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        cause = rng.standard_normal(500)
        effect = rng.standard_normal(500)
        rejections += causation_score(cause, effect).p_value < 0.05
    rate = rejections / seeds
    assert rate == pytest.approx(0.05, abs=0.03), f"null rejection rate {rate}"

    rng = np.random.default_rng(1)
    cause = rng.standard_normal(400)
    effect = np.zeros(400)
    effect[1:] = 0.8 * cause[:-1]
    effect += 0.05 * rng.standard_normal(400)
    assert causation_score(cause, effect).p_value < 0.001


# --- criterion 8: the outlier-feature effect ------------------------------------

RESPONSE_DECAY = (1.0, 0.8, 0.6, 0.45, 0.33)


def build_effect_panel(seed, T=200, response=18.0, lag=1, noise=0.3):
    """Index with large level-shift events; commodity responds after a lag.

    Event signs alternate randomly so the response is keyed to the event
    itself rather than the index level. Two events land in the test region.
    """
    rng = np.random.default_rng(seed)
    steps = rng.normal(0.0, 1.0, T)
    cut = int(0.8 * T)
    events = []
    for m in np.sort(rng.choice(np.arange(12, cut - 10), size=12, replace=False)):
        if (not events or m - events[-1] >= 8) and len(events) < 6:
            events.append(int(m))
    events += [cut + 8, cut + 22]
    signs = rng.choice([-1.0, 1.0], size=len(events))
    for m, s in zip(events, signs):
        steps[m] += 9.0 * s
    index = 50.0 + np.cumsum(steps)
    t = np.arange(T)
    commodity = 200.0 + 0.15 * t + np.sin(2 * np.pi * t / 12.0) \
        + rng.normal(0.0, noise, T)
    for m in events:
        for j, w in enumerate(RESPONSE_DECAY):
            if m + lag + j < T:
                commodity[m + lag + j] += response * w
    return MonthlyPanel(months=tuple(month_range(dt.date(2000, 1, 1), T)),
                        columns={"production": commodity, "index": index})


def detection_flags(panel, seed):
    signal = double_rolling_aggregate(panel.columns["index"], window=1)
    contamination = contamination_from_iqr(signal)
    detector = IsolationForestDetector(contamination=contamination,
                                       seed=seed).fit(
        signal[np.isfinite(signal)].reshape(-1, 1))
    return flag_series(detector, signal, panel.months).flags.astype(float)


def variant_rmse(panel, features, seed, lookback=18, horizon=3):
    ds = make_windows(panel, "production", lookback, horizon,
                      feature_names=features)
    train_idx, test_idx = split_windows(ds, len(panel), 0.8)
    model = LstmForecaster(lookback=lookback, horizon=horizon, hidden_size=8,
                           epochs=300, learning_rate=0.01, seed=seed,
                           ).fit(ds.inputs[train_idx], ds.targets[train_idx])
    return model.rmse_scaled(ds.inputs[test_idx], ds.targets[test_idx])


@criterion(8, "outlier flags improve forecasts")
def test_outlier_feature_effect(tmp_path):
    wins = 0
    rows = []
    for seed in range(20):
        panel = build_effect_panel(seed)
        flagged = panel.with_columns({"flag_index": detection_flags(panel, seed)},
                                     rule="outlier_flags")
        with_rmse = variant_rmse(flagged, ["production", "index", "flag_index"],
                                 seed)
        without_rmse = variant_rmse(flagged, ["production", "index"], seed)
        wins += with_rmse <= without_rmse
        name = f"panel_{seed:02d}"
        rows.append(EvalRow(name, "poly2", max(with_rmse, without_rmse) * 1.1,
                            None, 0.0, ("index",)))
        rows.append(EvalRow(name, "lstm_with", with_rmse, None, 0.0, ("index",)))
        rows.append(EvalRow(name, "lstm_without", without_rmse, None, 0.0,
                            ("index",)))
    assert wins >= 14, f"with-outliers won only {wins}/20 seeds"

    comparison = build_comparison([EvalReport(rows=tuple(rows))])
    table_path = tmp_path / "table6.csv"
    write_table6_csv(comparison, table_path)
    lines = table_path.read_text().splitlines()
    assert lines[0] == ("commodity,baseline_model,baseline_rmse,"
                        "lstm_with_rmse,lstm_without_rmse,winner")
    assert len(lines) == 21  # one winner row per panel


@criterion(9, "end-to-end determinism and runtime")
def test_run_all_twice_byte_identical(tmp_path):
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        config = pipeline.config_from_dict(
            pipeline.default_synthetic_config(output_dir=str(out), seed=7))
        start = time.time()
        pipeline.run_all(config)
        assert time.time() - start < 600.0
        outputs.append(out)
    for table in ("table5.csv", "table6.csv"):
        assert (outputs[0] / table).read_bytes() == \
            (outputs[1] / table).read_bytes(), f"{table} differs between runs"


@criterion(10, "structural reproduction from a CSV snapshot")
def test_csv_snapshot_produces_all_table_shapes(tmp_path):
    n_indices, n_commodities, n_months = 5, 15, 160
    panel, _ = generate_linked_panel(n_months, n_indices, n_commodities, seed=31)
    idx_dir = tmp_path / "indices"
    com_dir = tmp_path / "commodities"
    idx_dir.mkdir()
    com_dir.mkdir()
    for name in panel.names:
        ts = panel.series(name)
        if name.startswith("index_"):
            daily = monthly_to_business_daily(ts, seed=1, intra_noise=0.02)
            write_series_csv(daily, idx_dir / f"{name}.csv")
        else:
            write_series_csv(ts, com_dir / f"{name}.csv")
    out = tmp_path / "out"
    config = pipeline.config_from_dict({
        "output_dir": str(out),
        "seed": 3,
        "data": {"indices_dir": str(idx_dir), "commodities_dir": str(com_dir)},
        "preprocessing": {"window": 1, "split_fraction": 0.8},
        "outliers": {"n_trees": 50},
        "baselines": {"forest_trees": 25, "gbt_rounds": 25},
        "lstm": {"lookback": 60, "horizon": 30, "hidden_size": 6, "epochs": 10,
                 "learning_rate": 0.01},
    })
    pipeline.run_all(config)

    contamination = (out / "contamination.csv").read_text().splitlines()
    assert sum(",monthly," in ln for ln in contamination) == n_indices
    assert sum(",daily," in ln for ln in contamination) == n_indices

    correlation = (out / "correlation.csv").read_text().splitlines()
    assert len(correlation) == 1 + n_commodities
    assert len(correlation[0].split(",")) == 1 + n_indices

    table5 = (out / "table5.csv").read_text().splitlines()
    assert len(table5) == 1 + n_commodities
    assert len(table5[0].split(",")) == 1 + 4  # 4 data points per commodity

    table6 = (out / "table6.csv").read_text().splitlines()
    assert len(table6) == 1 + n_commodities

    pairing = (out / "pairing.csv").read_text().splitlines()
    assert len(pairing) == 1 + n_commodities
