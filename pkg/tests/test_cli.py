import hashlib
import json

import pytest
from click.testing import CliRunner

from agcast import pipeline
from agcast.cli import main
from agcast.errors import ConfigError, MissingArtifactError


def tiny_config(out_dir: str, seed: int = 5) -> dict:
    return {
        "output_dir": out_dir,
        "seed": seed,
        "synthetic": {"n_months": 60, "n_indices": 2, "n_commodities": 2},
        "preprocessing": {"window": 1, "split_fraction": 0.8},
        "outliers": {"n_trees": 30},
        "baselines": {"forest_trees": 15, "gbt_rounds": 15},
        "lstm": {"lookback": 12, "horizon": 6, "hidden_size": 4, "epochs": 8,
                 "learning_rate": 0.01},
    }


@pytest.fixture()
def config_path(tmp_path):
    out = tmp_path / "out"
    path = tmp_path / "config.json"
    path.write_text(json.dumps(tiny_config(str(out))))
    return path, out


EXPECTED_FILES = [
    "panel.csv", "roles.json", "panel_provenance.json", "contamination.csv",
    "flags/index_1.csv", "flags/index_2.csv", "correlation.csv",
    "causation.csv", "pairing.csv", "baselines.csv", "lstm_results.csv",
    "lstm/commodity_01.json", "lstm/commodity_02.json",
    "lstm/commodity_01_forecast.csv", "lstm/commodity_02_forecast.csv",
    "table5.csv", "table6.csv", "report.json", "forecast_commodity_01.csv",
    "forecast_commodity_02.csv", "manifest.json",
]


class TestRunAll:
    def test_smoke_writes_all_artifacts(self, config_path):
        path, out = config_path
        result = CliRunner().invoke(main, ["run-all", "--config", str(path)])
        assert result.exit_code == 0, result.output
        for rel in EXPECTED_FILES:
            assert (out / rel).exists(), rel

    def test_manifest_lists_every_file_with_hash(self, config_path):
        path, out = config_path
        assert CliRunner().invoke(main, ["run-all", "--config", str(path)]
                                  ).exit_code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        emitted = {str(p.relative_to(out)) for p in out.rglob("*")
                   if p.is_file() and p.name != "manifest.json"}
        assert emitted == set(manifest["files"])
        probe = "table6.csv"
        digest = hashlib.sha256((out / probe).read_bytes()).hexdigest()
        assert manifest["files"][probe] == digest

    def test_byte_identical_reruns(self, tmp_path):
        runner = CliRunner()
        outputs = []
        for run in ("a", "b"):
            out = tmp_path / run
            cfg = tmp_path / f"{run}.json"
            cfg.write_text(json.dumps(tiny_config(str(out), seed=11)))
            assert runner.invoke(main, ["run-all", "--config", str(cfg)]
                                 ).exit_code == 0
            outputs.append(out)
        for rel in ("table5.csv", "table6.csv", "panel.csv", "pairing.csv"):
            assert (outputs[0] / rel).read_bytes() == (outputs[1] / rel).read_bytes()

    def test_variant_flag_restricts_training(self, config_path):
        path, out = config_path
        runner = CliRunner()
        for stage in ("ingest", "detect", "relate"):
            assert runner.invoke(main, [stage, "--config", str(path)]
                                 ).exit_code == 0
        result = runner.invoke(main, ["train", "--config", str(path),
                                      "--variant", "with"])
        assert result.exit_code == 0
        text = (out / "lstm_results.csv").read_text()
        assert "lstm_with" in text and "lstm_without" not in text


class TestStageOrdering:
    def test_train_without_detect_names_producer(self, config_path):
        path, out = config_path
        runner = CliRunner()
        assert runner.invoke(main, ["ingest", "--config", str(path)]).exit_code == 0
        assert runner.invoke(main, ["relate", "--config", str(path)]).exit_code == 0
        result = runner.invoke(main, ["train", "--config", str(path)])
        assert result.exit_code == 3
        assert "detect" in result.output

    def test_detect_without_ingest(self, config_path):
        path, _ = config_path
        result = CliRunner().invoke(main, ["detect", "--config", str(path)])
        assert result.exit_code == 3
        assert "ingest" in result.output

    def test_stagewise_equals_run_all(self, tmp_path):
        runner = CliRunner()
        out_a = tmp_path / "a"
        cfg_a = tmp_path / "a.json"
        cfg_a.write_text(json.dumps(tiny_config(str(out_a), seed=3)))
        assert runner.invoke(main, ["run-all", "--config", str(cfg_a)]
                             ).exit_code == 0
        out_b = tmp_path / "b"
        cfg_b = tmp_path / "b.json"
        cfg_b.write_text(json.dumps(tiny_config(str(out_b), seed=3)))
        for stage in ("ingest", "detect", "relate", "baselines", "train",
                      "report"):
            assert runner.invoke(main, [stage, "--config", str(cfg_b)]
                                 ).exit_code == 0, stage
        assert (out_a / "table6.csv").read_bytes() == \
            (out_b / "table6.csv").read_bytes()


class TestConfigHandling:
    def test_missing_config_file(self, tmp_path):
        result = CliRunner().invoke(
            main, ["run-all", "--config", str(tmp_path / "nope.json")])
        assert result.exit_code == 2

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert CliRunner().invoke(main, ["ingest", "--config", str(path)]
                                  ).exit_code == 2

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        cfg = tiny_config(str(tmp_path / "out"))
        cfg["lstm"]["hidden"] = 9  # not a valid key name
        path.write_text(json.dumps(cfg))
        result = CliRunner().invoke(main, ["ingest", "--config", str(path)])
        assert result.exit_code == 2
        assert "hidden" in result.output

    def test_split_fraction_bounds(self):
        cfg = tiny_config("out")
        cfg["preprocessing"]["split_fraction"] = 0.4
        with pytest.raises(ConfigError):
            pipeline.config_from_dict(cfg)

    def test_data_and_synthetic_mutually_exclusive(self):
        cfg = tiny_config("out")
        cfg["data"] = {"indices_dir": "x", "commodities_dir": "y"}
        with pytest.raises(ConfigError):
            pipeline.config_from_dict(cfg)

    def test_out_and_seed_overrides(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(tiny_config(str(tmp_path / "ignored"), seed=1)))
        out = tmp_path / "actual"
        result = CliRunner().invoke(
            main, ["ingest", "--config", str(cfg), "--out", str(out),
                   "--seed", "99"])
        assert result.exit_code == 0
        assert (out / "panel.csv").exists()
        assert not (tmp_path / "ignored").exists()


class TestPipelineInternals:
    def test_require_artifacts_error_type(self, tmp_path):
        with pytest.raises(MissingArtifactError) as exc:
            pipeline.require_artifacts(tmp_path, "detect", ["flags/x.csv"])
        assert exc.value.stage == "detect"

    def test_numerical_failure_exits_4(self, tmp_path):
        import datetime as dt

        import numpy as np

        from agcast import dataio

        rng = np.random.default_rng(0)
        months = dataio.month_range(dt.date(2000, 1, 1), 60)
        values = rng.normal(size=60).cumsum() + 40
        series = dataio.TimeSeries("x", dates=months, values=values)
        idx_dir = tmp_path / "indices"
        com_dir = tmp_path / "commodities"
        idx_dir.mkdir()
        com_dir.mkdir()
        dataio.write_series_csv(series, idx_dir / "index_1.csv")
        # a commodity identical to the index makes the lag design collinear
        dataio.write_series_csv(series, com_dir / "commodity_x.csv")
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({
            "output_dir": str(tmp_path / "out"),
            "seed": 0,
            "data": {"indices_dir": str(idx_dir),
                     "commodities_dir": str(com_dir)},
            "preprocessing": {"window": 1, "split_fraction": 0.8},
        }))
        runner = CliRunner()
        assert runner.invoke(main, ["ingest", "--config", str(cfg)]).exit_code == 0
        result = runner.invoke(main, ["relate", "--config", str(cfg)])
        assert result.exit_code == 4

    def test_variant_forecast_csv_format(self, config_path):
        path, out = config_path
        assert CliRunner().invoke(main, ["run-all", "--config", str(path)]
                                  ).exit_code == 0
        lines = (out / "lstm" / "commodity_01_forecast.csv").read_text().splitlines()
        assert lines[0] == "month,variant,predicted_production"
        assert len(lines) == 1 + 2 * 6  # both variants cover the 6-month horizon
        assert lines[1].split(",")[1] == "lstm_with"

    def test_save_models_flag(self, tmp_path):
        cfg = tiny_config(str(tmp_path / "out"))
        cfg["save_models"] = True
        config = pipeline.config_from_dict(cfg)
        pipeline.run_all(config)
        models = tmp_path / "out" / "models"
        assert (models / "forest_index_1.json").exists()
        assert (models / "lstm_commodity_01_with.json").exists()
        assert (models / "linear_commodity_01.json").exists()

    def test_detect_on_levels_scores_every_month(self):
        import datetime as dt

        import numpy as np

        from agcast.dataio import month_range

        cfg = tiny_config("unused")
        cfg["outliers"]["detect_on"] = "levels"
        config = pipeline.config_from_dict(cfg)
        rng = np.random.default_rng(3)
        values = rng.normal(size=60).cumsum() + 100
        months = month_range(dt.date(2000, 1, 1), 60)
        _, flags, _ = pipeline.detect_series(values, months, config, seed=1)
        assert np.all(np.isfinite(flags.scores))  # levels have no undefined edge

    def test_default_synthetic_config_parses(self):
        config = pipeline.config_from_dict(pipeline.default_synthetic_config())
        assert config.synthetic.n_indices == 5
        assert config.synthetic.n_commodities == 15
        assert config.lstm.lookback == 60
        assert config.lstm.horizon == 30

    def test_csv_snapshot_ingestion(self, tmp_path):
        import datetime as dt

        import numpy as np

        from agcast import dataio

        panel, _ = dataio.generate_linked_panel(48, 2, 3, seed=13)
        idx_dir = tmp_path / "indices"
        com_dir = tmp_path / "commodities"
        idx_dir.mkdir()
        com_dir.mkdir()
        for name in panel.names:
            ts = panel.series(name)
            if name.startswith("index_"):
                daily = dataio.monthly_to_business_daily(ts, seed=1,
                                                         intra_noise=0.01)
                dataio.write_series_csv(daily, idx_dir / f"{name}.csv")
            else:
                dataio.write_series_csv(ts, com_dir / f"{name}.csv")
        out = tmp_path / "out"
        cfg = {
            "output_dir": str(out),
            "seed": 2,
            "data": {"indices_dir": str(idx_dir),
                     "commodities_dir": str(com_dir)},
            "preprocessing": {"window": 1, "split_fraction": 0.8},
            "outliers": {"n_trees": 20},
            "baselines": {"forest_trees": 10, "gbt_rounds": 10},
            "lstm": {"lookback": 10, "horizon": 4, "hidden_size": 4,
                     "epochs": 6, "learning_rate": 0.01},
        }
        pipeline.run_all(pipeline.config_from_dict(cfg))
        assert (out / "daily" / "index_1.csv").exists()
        lines = (out / "contamination.csv").read_text().splitlines()
        monthly = [ln for ln in lines[1:] if ",monthly," in ln]
        daily = [ln for ln in lines[1:] if ",daily," in ln]
        assert len(monthly) == 2 and len(daily) == 2
        panel_back = dataio.read_panel_csv(out / "panel.csv")
        assert all(m.day == 1 for m in panel_back.months)
