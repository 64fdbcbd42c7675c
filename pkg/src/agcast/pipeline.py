"""Stage orchestration: ingest -> detect -> relate -> baselines -> train -> report.

Each stage reads only declared artifacts from the output directory, writes
its own, and records every emitted file in manifest.json with a content
hash. Given the same config and seed the whole chain is byte-identical.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines as bl
from . import dataio, outliers, preprocess, relations, report as rpt
from .errors import (
    ConfigError,
    InsufficientLengthError,
    MissingArtifactError,
    StageFailureError,
)
from .lstm import ForecastResult, LstmForecaster, write_variant_forecast_csv

STAGES = ("ingest", "detect", "relate", "baselines", "train", "report")


# --- configuration --------------------------------------------------------------

@dataclass(frozen=True)
class DataConfig:
    indices_dir: str
    commodities_dir: str
    date_format: str = "%Y-%m-%d"


@dataclass(frozen=True)
class SyntheticConfig:
    n_months: int = 240
    n_indices: int = 5
    n_commodities: int = 15
    shocks_per_index: int = 4
    shock_sigma: float = 9.0
    response_lag: int = 1
    response_months: int = 3
    response_scale: float = 6.0


@dataclass(frozen=True)
class PreprocessConfig:
    window: int = 5
    split_fraction: float = 0.8


@dataclass(frozen=True)
class OutlierConfig:
    n_trees: int = 100
    subsample_size: int | None = None
    fence_k: float = 1.5
    seed: int | None = None
    detect_on: str = "change_signal"  # or "levels"


@dataclass(frozen=True)
class RelationConfig:
    lags: int = 3


@dataclass(frozen=True)
class BaselineConfig:
    production_lags: int = 3
    forest_trees: int = 100
    gbt_rounds: int = 100
    seed: int | None = None


@dataclass(frozen=True)
class LstmConfig:
    lookback: int = 60
    horizon: int = 30
    hidden_size: int = 64
    epochs: int = 150
    learning_rate: float = 1e-3
    batch_size: int | None = None
    gradient_clip: float = 5.0
    seed: int | None = None
    include_all_flags: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    output_dir: str = "out"
    seed: int = 0
    data: DataConfig | None = None
    synthetic: SyntheticConfig | None = None
    preprocessing: PreprocessConfig = field(default_factory=PreprocessConfig)
    outliers: OutlierConfig = field(default_factory=OutlierConfig)
    relations: RelationConfig = field(default_factory=RelationConfig)
    baselines: BaselineConfig = field(default_factory=BaselineConfig)
    lstm: LstmConfig = field(default_factory=LstmConfig)
    save_models: bool = False

    def __post_init__(self):
        if (self.data is None) == (self.synthetic is None):
            raise ConfigError("exactly one of 'data' or 'synthetic' must be set")
        if not 0.5 < self.preprocessing.split_fraction < 0.95:
            raise ConfigError("split_fraction must lie in (0.5, 0.95)")
        if self.lstm.lookback < 1 or self.lstm.horizon < 1:
            raise ConfigError("lookback and horizon must be >= 1")
        if self.preprocessing.window < 1:
            raise ConfigError("preprocessing window must be >= 1")
        if self.outliers.detect_on not in ("change_signal", "levels"):
            raise ConfigError("detect_on must be 'change_signal' or 'levels'")

    def outlier_seed(self) -> int:
        return self.seed if self.outliers.seed is None else self.outliers.seed

    def baseline_seed(self) -> int:
        return self.seed if self.baselines.seed is None else self.baselines.seed

    def lstm_seed(self) -> int:
        return self.seed if self.lstm.seed is None else self.lstm.seed


def _build_section(cls, payload: dict, name: str):
    if payload is None:
        return None
    if not isinstance(payload, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(payload) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    try:
        return cls(**payload)
    except TypeError as exc:
        raise ConfigError(f"bad section {name!r}: {exc}") from exc


def config_from_dict(payload: dict) -> PipelineConfig:
    if not isinstance(payload, dict):
        raise ConfigError("config root must be a mapping")
    sections = {
        "data": DataConfig, "synthetic": SyntheticConfig,
        "preprocessing": PreprocessConfig, "outliers": OutlierConfig,
        "relations": RelationConfig, "baselines": BaselineConfig,
        "lstm": LstmConfig,
    }
    known = {"output_dir", "seed", "save_models", *sections}
    unknown = set(payload) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for key in ("output_dir", "seed", "save_models"):
        if key in payload:
            kwargs[key] = payload[key]
    for key, cls in sections.items():
        if key in payload:
            built = _build_section(cls, payload[key], key)
            if built is not None:
                kwargs[key] = built
    if "preprocessing" not in kwargs:
        kwargs["preprocessing"] = PreprocessConfig()
    return PipelineConfig(**kwargs)


def load_config(path, out_override: str | None = None,
                seed_override: int | None = None) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    config = config_from_dict(payload)
    changes = {}
    if out_override is not None:
        changes["output_dir"] = out_override
    if seed_override is not None:
        changes["seed"] = seed_override
    return dataclasses.replace(config, **changes) if changes else config


def default_synthetic_config(output_dir: str = "out", seed: int = 7) -> dict:
    """The bundled end-to-end demo: 5 indices, 15 commodities, 240 months."""
    return {
        "output_dir": output_dir,
        "seed": seed,
        "synthetic": {"n_months": 240, "n_indices": 5, "n_commodities": 15},
        "preprocessing": {"window": 1, "split_fraction": 0.8},
        "outliers": {"n_trees": 100},
        "relations": {"lags": 3},
        "baselines": {"production_lags": 3},
        "lstm": {"lookback": 60, "horizon": 30, "hidden_size": 16,
                 "epochs": 80, "learning_rate": 0.003},
    }


# --- artifact bookkeeping --------------------------------------------------------

def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def update_manifest(out: Path, paths: list[Path]) -> None:
    manifest_path = out / "manifest.json"
    manifest = {"files": {}}
    if manifest_path.exists():
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    for p in paths:
        manifest["files"][str(p.relative_to(out))] = _sha256(p)
    manifest["files"] = dict(sorted(manifest["files"].items()))
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


def require_artifacts(out: Path, producer: str, relpaths: list[str]) -> None:
    for rel in relpaths:
        if not (out / rel).exists():
            raise MissingArtifactError(producer, out / rel)


def _read_roles(out: Path) -> tuple[list[str], list[str]]:
    with open(out / "roles.json", encoding="utf-8") as fh:
        roles = json.load(fh)
    return roles["indices"], roles["commodities"]


def _load_series_dir(directory: str, date_format: str) -> list[dataio.TimeSeries]:
    root = Path(directory)
    if not root.is_dir():
        raise ConfigError(f"data directory not found: {directory}")
    files = sorted(p for p in root.iterdir() if p.suffix == ".csv")
    if not files:
        raise ConfigError(f"no CSV files in {directory}")
    schema = dataio.CsvSchema(date_format=date_format)
    return [dataio.load_csv(p, schema) for p in files]


# --- stages -----------------------------------------------------------------------

def run_ingest(config: PipelineConfig) -> list[Path]:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if config.synthetic is not None:
        s = config.synthetic
        panel, _ = dataio.generate_linked_panel(
            n_months=s.n_months, n_indices=s.n_indices,
            n_commodities=s.n_commodities, seed=config.seed,
            shocks_per_index=s.shocks_per_index, shock_sigma=s.shock_sigma,
            response_lag=s.response_lag, response_months=s.response_months,
            response_scale=s.response_scale,
        )
        indices = [n for n in panel.names if n.startswith("index_")]
        commodities = [n for n in panel.names if n.startswith("commodity_")]
    else:
        raw_indices = _load_series_dir(config.data.indices_dir,
                                       config.data.date_format)
        raw_commodities = _load_series_dir(config.data.commodities_dir,
                                           config.data.date_format)
        daily_dir = out / "daily"
        daily_dir.mkdir(exist_ok=True)
        monthly = []
        for ts in raw_indices:
            if not ts.is_monthly():
                path = daily_dir / f"{ts.name}.csv"
                dataio.write_series_csv(ts, path)
                written.append(path)
            monthly.append(dataio.align_to_month_start(ts, skip_leading_empty=True))
        for ts in raw_commodities:
            monthly.append(dataio.align_to_month_start(ts, skip_leading_empty=True))
        panel = dataio.merge_panel(monthly)
        indices = [ts.name for ts in raw_indices]
        commodities = [ts.name for ts in raw_commodities]

    panel_path = out / "panel.csv"
    dataio.write_panel_csv(panel, panel_path)
    roles_path = out / "roles.json"
    with open(roles_path, "w", encoding="utf-8") as fh:
        json.dump({"indices": indices, "commodities": commodities}, fh, indent=1)
    prov_path = out / "panel_provenance.json"
    with open(prov_path, "w", encoding="utf-8") as fh:
        json.dump(dict(sorted(panel.provenance.items())), fh, indent=1)
    written += [panel_path, roles_path, prov_path]
    update_manifest(out, written)
    return written


def _change_signal(values: np.ndarray, config: PipelineConfig) -> np.ndarray:
    if config.outliers.detect_on == "levels":
        return np.asarray(values, dtype=np.float64)
    return preprocess.double_rolling_aggregate(values, config.preprocessing.window)


def detect_series(values: np.ndarray, months, config: PipelineConfig,
                  seed: int) -> tuple[float, outliers.OutlierFlags,
                                      outliers.IsolationForestDetector]:
    """Contamination estimate plus isolation-forest flags for one series."""
    signal = _change_signal(values, config)
    contamination = outliers.contamination_from_iqr(signal, config.outliers.fence_k)
    defined = signal[np.isfinite(signal)]
    detector = outliers.IsolationForestDetector(
        n_trees=config.outliers.n_trees,
        subsample_size=config.outliers.subsample_size,
        contamination=contamination, seed=seed,
    ).fit(defined.reshape(-1, 1))
    flags = outliers.flag_series(detector, signal, months)
    return contamination, flags, detector


def run_detect(config: PipelineConfig) -> list[Path]:
    out = Path(config.output_dir)
    require_artifacts(out, "ingest", ["panel.csv", "roles.json"])
    panel = dataio.read_panel_csv(out / "panel.csv")
    indices, _ = _read_roles(out)
    flags_dir = out / "flags"
    flags_dir.mkdir(exist_ok=True)
    written: list[Path] = []
    rows = []
    base_seed = config.outlier_seed()
    for i, name in enumerate(indices):
        seed_i = int(np.random.SeedSequence((base_seed, i)).generate_state(1)[0])
        contamination, flags, detector = detect_series(
            panel.columns[name], panel.months, config, seed_i)
        rows.append((name, "monthly", contamination))
        path = flags_dir / f"{name}.csv"
        outliers.write_flags_csv(flags, path)
        written.append(path)
        if config.save_models:
            models_dir = out / "models"
            models_dir.mkdir(exist_ok=True)
            mpath = models_dir / f"forest_{name}.json"
            detector.save(mpath)
            written.append(mpath)
    daily_dir = out / "daily"
    if daily_dir.is_dir():
        for i, name in enumerate(indices):
            path = daily_dir / f"{name}.csv"
            if not path.exists():
                continue
            ts = dataio.load_csv(path)
            signal = _change_signal(ts.values, config)
            rows.append((name, "daily",
                         outliers.contamination_from_iqr(signal,
                                                         config.outliers.fence_k)))
    cont_path = out / "contamination.csv"
    with open(cont_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "frequency", "contamination_rate"])
        for name, freq, rate in rows:
            writer.writerow([name, freq, repr(float(rate))])
    written.append(cont_path)
    update_manifest(out, written)
    return written


def run_relate(config: PipelineConfig) -> list[Path]:
    out = Path(config.output_dir)
    require_artifacts(out, "ingest", ["panel.csv", "roles.json"])
    panel = dataio.read_panel_csv(out / "panel.csv")
    indices, commodities = _read_roles(out)
    matrix = relations.build_relation_matrix(panel, commodities, indices,
                                             lags=config.relations.lags)
    pairs = relations.pair_all(matrix)
    corr_path = out / "correlation.csv"
    caus_path = out / "causation.csv"
    pair_path = out / "pairing.csv"
    relations.write_relation_csvs(matrix, corr_path, caus_path)
    relations.write_pairing_csv(pairs, pair_path)
    written = [corr_path, caus_path, pair_path]
    update_manifest(out, written)
    return written


def _read_pairing(out: Path) -> dict[str, dict]:
    pairs = {}
    with open(out / "pairing.csv", newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            pairs[rec["commodity"]] = {
                "corr_index": rec["corr_index"],
                "caus_index": rec["caus_index"],
                "merged": rec["merged"] == "true",
            }
    return pairs


def paired_feature_columns(pairing: dict) -> list[str]:
    """Index columns a commodity's models use: causation first, no duplicates."""
    cols = [pairing["caus_index"]]
    if pairing["corr_index"] != pairing["caus_index"]:
        cols.append(pairing["corr_index"])
    return cols


def _baseline_design(panel: dataio.MonthlyPanel, commodity: str,
                     index_cols: list[str], lags: int):
    """Feature rows: paired index values at t plus production lags t-1..t-lags."""
    y_full = panel.columns[commodity]
    T = len(panel)
    rows = np.arange(lags, T)
    features = [panel.columns[c][rows] for c in index_cols]
    features += [y_full[rows - k] for k in range(1, lags + 1)]
    return np.column_stack(features), y_full[rows]


def run_baselines(config: PipelineConfig) -> list[Path]:
    out = Path(config.output_dir)
    require_artifacts(out, "ingest", ["panel.csv", "roles.json"])
    require_artifacts(out, "relate", ["pairing.csv"])
    panel = dataio.read_panel_csv(out / "panel.csv")
    _, commodities = _read_roles(out)
    pairing = _read_pairing(out)
    seed = config.baseline_seed()
    rows = []
    for ci, commodity in enumerate(commodities):
        index_cols = paired_feature_columns(pairing[commodity])
        X, y = _baseline_design(panel, commodity, index_cols,
                                config.baselines.production_lags)
        train, test = preprocess.chronological_split(
            len(y), config.preprocessing.split_fraction)
        x_scaler = preprocess.MinMaxScaler(tolerate_constant=True).fit(X[train])
        y_scaler = preprocess.MinMaxScaler(tolerate_constant=True).fit(
            y[train].reshape(-1, 1))
        Xs = x_scaler.transform(X)
        ys = y_scaler.transform(y.reshape(-1, 1)).ravel()
        seed_c = int(np.random.SeedSequence((seed, ci)).generate_state(1)[0])
        models = {
            "linear": bl.PolynomialRegression(degree=1),
            "poly2": bl.PolynomialRegression(degree=2),
            "tree": bl.RegressionTree(),
            "forest": bl.RandomForest(n_trees=config.baselines.forest_trees,
                                      seed=seed_c),
            "gbt": bl.GradientBoosting(rounds=config.baselines.gbt_rounds,
                                       seed=seed_c),
        }
        for variant, model in models.items():
            model.fit(Xs[train], ys[train])
            pred_scaled = model.predict(Xs[test])
            err = rpt.rmse(pred_scaled, ys[test])
            pred_units = preprocess.inverse_minmax(pred_scaled, y_scaler.params_[0])
            err_raw = rpt.rmse(pred_units, y[test])
            try:
                score = rpt.r2(pred_scaled, ys[test])
            except Exception:
                score = None
            rows.append((commodity, variant, err, err_raw, score,
                         float(pred_units[-1]), index_cols))
            if config.save_models:
                models_dir = out / "models"
                models_dir.mkdir(exist_ok=True)
                bl.save_model_json(model,
                                   models_dir / f"{variant}_{commodity}.json")
    path = out / "baselines.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["commodity", "variant", "rmse_scaled", "rmse_raw",
                         "r2", "prediction_last", "paired_indices"])
        for commodity, variant, err, err_raw, score, pred, cols in rows:
            writer.writerow([commodity, variant, repr(err), repr(err_raw),
                             "" if score is None else repr(score),
                             repr(pred), "|".join(cols)])
    update_manifest(out, [path])
    return [path]


def _read_flags_column(out: Path, index: str) -> np.ndarray:
    flags = []
    with open(out / "flags" / f"{index}.csv", newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            flags.append(float(rec["flag"]))
    return np.array(flags)


def train_commodity(panel: dataio.MonthlyPanel, commodity: str,
                    feature_names: list[str], variant: str,
                    config: PipelineConfig, seed: int) -> dict:
    """Fit one forecaster variant and collect its evaluation payload."""
    L, H = config.lstm.lookback, config.lstm.horizon
    ds = preprocess.make_windows(panel, commodity, L, H,
                                 feature_names=feature_names)
    train_idx, test_idx = preprocess.split_windows(
        ds, len(panel), config.preprocessing.split_fraction)
    if len(train_idx) == 0:
        raise InsufficientLengthError(
            f"{commodity}: no training windows for lookback {L} + horizon {H}"
        )
    model = LstmForecaster(
        lookback=L, horizon=H, hidden_size=config.lstm.hidden_size,
        epochs=config.lstm.epochs, learning_rate=config.lstm.learning_rate,
        batch_size=config.lstm.batch_size, seed=seed,
        gradient_clip=config.lstm.gradient_clip,
    ).fit(ds.inputs[train_idx], ds.targets[train_idx])
    eval_idx = test_idx if len(test_idx) else train_idx
    rmse_scaled = model.rmse_scaled(ds.inputs[eval_idx], ds.targets[eval_idx])
    pred_units = model.predict(ds.inputs[eval_idx]).ravel()
    truth_units = ds.targets[eval_idx].ravel()
    rmse_raw = rpt.rmse(pred_units, truth_units)
    try:
        score = rpt.r2(pred_units, truth_units) if len(test_idx) else None
    except Exception:
        score = None
    history_fit = model.predict(ds.inputs[train_idx])[:, 0]
    result = ForecastResult(
        variant=variant,
        history_fit=history_fit,
        forecast=model.forecast(panel.matrix(feature_names)[-L:]),
        rmse_scaled=float(rmse_scaled),
    )
    return {
        "model": model,
        "result": result,
        "rmse_raw": float(rmse_raw),
        "r2": score,
        "history_months": [m.isoformat() for m in
                           panel.months[L:L + len(history_fit)]],
        "forecast_months": [dataio.add_months(panel.months[-1], k + 1)
                            for k in range(H)],
        "prediction_last": float(result.forecast[-1]),
    }


def run_train(config: PipelineConfig, variants: tuple[str, ...] = ("with", "without")
              ) -> list[Path]:
    out = Path(config.output_dir)
    require_artifacts(out, "ingest", ["panel.csv", "roles.json"])
    require_artifacts(out, "relate", ["pairing.csv"])
    panel = dataio.read_panel_csv(out / "panel.csv")
    indices, commodities = _read_roles(out)
    pairing = _read_pairing(out)
    require_artifacts(out, "detect", [f"flags/{name}.csv" for name in indices])
    flag_cols = {f"flag_{name}": _read_flags_column(out, name) for name in indices}
    panel_aug = panel.with_columns(flag_cols, rule="outlier_flags")
    lstm_dir = out / "lstm"
    lstm_dir.mkdir(exist_ok=True)
    written: list[Path] = []
    rows = []
    seed = config.lstm_seed()
    for ci, commodity in enumerate(commodities):
        index_cols = paired_feature_columns(pairing[commodity])
        base_features = [commodity] + index_cols
        if config.lstm.include_all_flags:
            flag_features = [f"flag_{name}" for name in indices]
        else:
            flag_features = [f"flag_{name}" for name in index_cols]
        payload = {}
        forecast_rows = []
        forecast_months = None
        for variant in variants:
            features = base_features + (flag_features if variant == "with" else [])
            seed_cv = int(np.random.SeedSequence(
                (seed, ci, 0 if variant == "with" else 1)).generate_state(1)[0])
            variant_name = f"lstm_{variant}"
            trained = train_commodity(panel_aug, commodity, features,
                                      variant_name, config, seed_cv)
            result = trained["result"]
            forecast_months = trained["forecast_months"]
            forecast_rows.append(result)
            rows.append((commodity, variant_name, result.rmse_scaled,
                         trained["rmse_raw"], trained["r2"],
                         trained["prediction_last"], index_cols))
            payload[variant_name] = {
                "rmse_scaled": result.rmse_scaled,
                "rmse_raw": trained["rmse_raw"],
                "r2": trained["r2"],
                "history_months": trained["history_months"],
                "history_fit": [float(v) for v in result.history_fit],
                "forecast_months": [m.isoformat() for m in forecast_months],
                "forecast": [float(v) for v in result.forecast],
                "prediction_last": trained["prediction_last"],
            }
            if config.save_models:
                models_dir = out / "models"
                models_dir.mkdir(exist_ok=True)
                mpath = models_dir / f"lstm_{commodity}_{variant}.json"
                trained["model"].save(mpath)
                written.append(mpath)
        jpath = lstm_dir / f"{commodity}.json"
        with open(jpath, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
        written.append(jpath)
        fpath = lstm_dir / f"{commodity}_forecast.csv"
        write_variant_forecast_csv(fpath, forecast_months, forecast_rows)
        written.append(fpath)
    path = out / "lstm_results.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["commodity", "variant", "rmse_scaled", "rmse_raw",
                         "r2", "prediction_last", "paired_indices"])
        for commodity, variant, err, err_raw, score, pred, cols in rows:
            writer.writerow([commodity, variant, repr(float(err)),
                             repr(float(err_raw)),
                             "" if score is None else repr(float(score)),
                             repr(float(pred)), "|".join(cols)])
    written.append(path)
    update_manifest(out, written)
    return written


def _read_eval_rows(path: Path) -> list[rpt.EvalRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append(rpt.EvalRow(
                commodity=rec["commodity"], variant=rec["variant"],
                rmse=float(rec["rmse_scaled"]),
                r2=float(rec["r2"]) if rec["r2"] else None,
                prediction_last=float(rec["prediction_last"]),
                paired_indices=tuple(rec["paired_indices"].split("|")),
            ))
    return rows


def run_report(config: PipelineConfig) -> list[Path]:
    out = Path(config.output_dir)
    require_artifacts(out, "ingest", ["panel.csv", "roles.json"])
    require_artifacts(out, "baselines", ["baselines.csv"])
    require_artifacts(out, "train", ["lstm_results.csv"])
    panel = dataio.read_panel_csv(out / "panel.csv")
    _, commodities = _read_roles(out)
    baseline_report = rpt.EvalReport(rows=tuple(_read_eval_rows(out / "baselines.csv")))
    lstm_report = rpt.EvalReport(rows=tuple(_read_eval_rows(out / "lstm_results.csv")))
    merged = rpt.merge_reports([baseline_report, lstm_report])
    merged = rpt.EvalReport(rows=merged.rows, metadata={
        "seed": config.seed,
        "panel_hash": _sha256(out / "panel.csv"),
        "config": {
            "split_fraction": config.preprocessing.split_fraction,
            "lookback": config.lstm.lookback,
            "horizon": config.lstm.horizon,
        },
    })
    comparison = rpt.build_comparison([merged])
    t5 = out / "table5.csv"
    t6 = out / "table6.csv"
    rj = out / "report.json"
    rpt.write_table5_csv(merged, t5)
    rpt.write_table6_csv(comparison, t6)
    rpt.write_report_json(merged, comparison, rj)
    written = [t5, t6, rj]
    month_pos = {m: k for k, m in enumerate(panel.months)}
    for commodity in commodities:
        require_artifacts(out, "train", [f"lstm/{commodity}.json"])
        with open(out / "lstm" / f"{commodity}.json", encoding="utf-8") as fh:
            payload = json.load(fh)
        with_part = payload[rpt.LSTM_WITH]
        without_part = payload[rpt.LSTM_WITHOUT]
        fitted = np.full(len(panel), np.nan)
        for m_iso, value in zip(with_part["history_months"],
                                with_part["history_fit"]):
            fitted[month_pos[dt.date.fromisoformat(m_iso)]] = value
        fpath = out / f"forecast_{commodity}.csv"
        rpt.write_forecast_csv(
            fpath, panel.months, panel.columns[commodity], fitted,
            [dt.date.fromisoformat(m) for m in with_part["forecast_months"]],
            with_part["forecast"], without_part["forecast"])
        written.append(fpath)
    update_manifest(out, written)
    return written


STAGE_RUNNERS = {
    "ingest": run_ingest,
    "detect": run_detect,
    "relate": run_relate,
    "baselines": run_baselines,
    "train": run_train,
    "report": run_report,
}


def run_stage(name: str, config: PipelineConfig, **kwargs) -> list[Path]:
    runner = STAGE_RUNNERS[name]
    try:
        return runner(config, **kwargs)
    except (ConfigError, MissingArtifactError):
        raise
    except Exception as exc:
        if isinstance(exc, StageFailureError):
            raise
        raise StageFailureError(name, exc) from exc


def run_all(config: PipelineConfig,
            variants: tuple[str, ...] = ("with", "without")) -> list[Path]:
    written: list[Path] = []
    for stage in STAGES:
        kwargs = {"variants": variants} if stage == "train" else {}
        written.extend(run_stage(stage, config, **kwargs))
    return written
