import json

import pytest

from driftwatch.cli import main
from driftwatch.config import load_config
from driftwatch.datamodel import MonthKey
from driftwatch.errors import ConfigError
from driftwatch.service import ServiceState
from driftwatch.labelflow import Reaction

from conftest import telemetry_lines
from helpers import month_ts


class TestConfig:
    def test_defaults_and_resolution(self, pipeline_config):
        assert pipeline_config.sampling.k == 4
        assert pipeline_config.labeling.quorum == 2
        assert pipeline_config.telemetry_path.name == "telemetry.jsonl"
        assert pipeline_config.telemetry_path.is_absolute()

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[sampling]\nk = 4\nbudgetz = 3\n")
        with pytest.raises(ConfigError, match="budgetz"):
            load_config(path)

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[nonsense]\nx = 1\n")
        with pytest.raises(ConfigError, match="nonsense"):
            load_config(path)

    def test_json_config_supported(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"sampling": {"k": 3}}))
        assert load_config(path).sampling.k == 3

    def test_value_validation(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[labeling]\nquorum = 0\n")
        with pytest.raises(ConfigError, match="quorum"):
            load_config(path)

    def test_bad_link_template_rejected(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text(
            '[labeling]\nlink_templates = [{ title = "x", url = "https://a/{nope}" }]\n'
        )
        with pytest.raises(ConfigError, match="nope"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.toml")


def write_months(tmp_path, months, n=300):
    stream = tmp_path / "stream.jsonl"
    lines = []
    for i, month in enumerate(months):
        lines.extend(telemetry_lines(month, n, seed=10 + i))
    stream.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return stream


class TestCliFlow:
    def test_ingest_train_sample_drift_entropy(self, pipeline_dir, tmp_path, capsys):
        months = [MonthKey(2023, m) for m in (1, 2, 3)]
        stream = write_months(tmp_path, months)
        cfg = str(pipeline_dir)

        assert main(["ingest", "--config", cfg, str(stream)]) == 0
        out = capsys.readouterr().out
        assert "ingested 900" in out

        assert main(["train-clusters", "--config", cfg, "--months", "2023-01:2023-02"]) == 0
        out = capsys.readouterr().out
        assert "trained 4 clusters" in out
        config = load_config(pipeline_dir)
        assert config.model_path.exists()
        model = json.loads(config.model_path.read_text())
        assert len(model["centroids"]) == 4

        assert main(["sample", "--config", cfg, "--month", "2023-03", "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["points"] == 300
        assert sum(payload["accepted"]) > 0
        assert config.decisions_path.exists()

        assert main(["drift", "--config", cfg, "--kind", "workload", "--month", "2023-03"]) == 0
        out = capsys.readouterr().out
        assert "workload drift" in out
        assert "exceeded=False" in out
        assert (config.reports_dir / "workload_kl.csv").exists()
        assert (config.reports_dir / "workload_kl.svg").exists()

        assert main(["drift", "--config", cfg, "--kind", "sysperf", "--month", "2023-03", "--json"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["kind"] == "sysperf"
        assert report["kl"]["value"] >= 0.0

        # no labels yet: entropy reports the no-labels state and exits clean
        assert main(["entropy", "--config", cfg, "--month", "2023-03", "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["status"] == "no_labels"

    def test_entropy_with_labels_and_eval(self, pipeline_dir, tmp_path, capsys):
        months = [MonthKey(2023, m) for m in (1, 2)]
        stream = write_months(tmp_path, months)
        cfg = str(pipeline_dir)
        assert main(["ingest", "--config", cfg, str(stream)]) == 0
        assert main(["train-clusters", "--config", cfg, "--months", "2023-01:2023-01"]) == 0
        capsys.readouterr()

        # resolve labels through the engine (alice+bob are enrolled)
        config = load_config(pipeline_dir)
        state = ServiceState(config)
        points = state.telemetry.points_in_month(MonthKey(2023, 2))[:40]
        model = state.model
        from driftwatch.sampling import StreamSampler

        sampler = StreamSampler(model, 1e9, seed=0)
        predictions = []
        for i, point in enumerate(points):
            decision = sampler.decide(point)
            state.engine.create_card(point, decision)
            verdict = Reaction.THUMB_DOWN if i % 4 == 0 else Reaction.THUMB_UP
            state.engine.ingest_reaction(point.point_id, "alice", verdict, point.timestamp + 60)
            state.engine.ingest_reaction(point.point_id, "bob", verdict, point.timestamp + 90)
            predictions.append(
                {
                    "point_id": point.point_id,
                    "predicted": "abnormal" if i % 4 == 0 else "normal",
                }
            )

        assert main(["entropy", "--config", cfg, "--month", "2023-02", "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["status"] == "ok"
        assert sum(payload["cluster_counts"]) == 40
        assert payload["entropy_bits"] > 0.5

        preds_path = tmp_path / "preds.jsonl"
        preds_path.write_text("\n".join(json.dumps(p) for p in predictions) + "\n")
        assert main(["eval", "--config", cfg, str(preds_path), "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["pairs"] == 40
        assert payload["f1"] == 1.0
        assert (config.reports_dir / "eval_summary.json").exists()
        assert (config.reports_dir / "eval_histogram.csv").exists()


class TestCliErrors:
    def test_empty_month_range_exits_2(self, pipeline_dir, capsys):
        code = main(
            ["train-clusters", "--config", str(pipeline_dir), "--months", "2023-01:2023-02"]
        )
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_k_larger_than_points_exits_2(self, pipeline_dir, tmp_path, capsys):
        month = MonthKey(2023, 1)
        stream = tmp_path / "tiny.jsonl"
        stream.write_text("\n".join(telemetry_lines(month, 3, seed=0)) + "\n")
        cfg = str(pipeline_dir)
        assert main(["ingest", "--config", cfg, str(stream)]) == 0
        code = main(["train-clusters", "--config", cfg, "--months", "2023-01:2023-01"])
        assert code == 2

    def test_drift_without_predecessor_exits_2(self, pipeline_dir, tmp_path, capsys):
        stream = write_months(tmp_path, [MonthKey(2023, 1)])
        cfg = str(pipeline_dir)
        assert main(["ingest", "--config", cfg, str(stream)]) == 0
        assert main(["drift", "--config", cfg, "--kind", "workload", "--month", "2023-01"]) == 2

    def test_sample_without_model_exits_2(self, pipeline_dir, capsys):
        assert main(["sample", "--config", str(pipeline_dir), "--month", "2023-01"]) == 2

    def test_bad_config_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.toml"
        bad.write_text("[sampling]\nwat = 1\n")
        assert main(["ingest", "--config", str(bad), "nothing.jsonl"]) == 2

    def test_missing_input_file_exits_2(self, pipeline_dir, capsys):
        assert main(["ingest", "--config", str(pipeline_dir), "missing.jsonl"]) == 2

    def test_corrupt_model_exits_1(self, pipeline_dir, tmp_path, capsys):
        config = load_config(pipeline_dir)
        config.model_path.parent.mkdir(parents=True, exist_ok=True)
        config.model_path.write_text("{not json")
        assert main(["sample", "--config", str(pipeline_dir), "--month", "2023-01"]) == 1

    def test_bad_month_argument_exits_2(self, pipeline_dir, capsys):
        with pytest.raises(SystemExit) as err:
            main(["entropy", "--config", str(pipeline_dir), "--month", "202301"])
        assert err.value.code == 2
