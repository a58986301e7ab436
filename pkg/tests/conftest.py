import json

import numpy as np
import pytest

from driftwatch.config import load_config

from helpers import correlated_workloads, month_ts

CONFIG_TOML = """
[paths]
telemetry = "data/telemetry.jsonl"
labels = "data/labels.jsonl"
cards = "data/cards.jsonl"
decisions = "data/decisions.jsonl"
model = "data/model.json"
reports_dir = "data/reports"
inbox = "data/inbox"

[sampling]
k = 4
budget_per_cluster = 20.0
train_seed = 1
sample_seed = 1

[labeling]
quorum = 2
window_hours = 72.0
enrolled_annotators = ["alice", "bob"]
link_templates = [{ title = "dashboard", url = "https://dash.example/{entity_id}" }]

[eval]
bootstrap_resamples = 200
bootstrap_seed = 3
"""


@pytest.fixture
def pipeline_dir(tmp_path):
    """Config file plus empty data dir; stores get created on demand."""
    config_path = tmp_path / "pipeline.toml"
    config_path.write_text(CONFIG_TOML, encoding="utf-8")
    (tmp_path / "data").mkdir()
    return config_path


@pytest.fixture
def pipeline_config(pipeline_dir):
    return load_config(pipeline_dir)


def telemetry_lines(month, n, seed, mix=(0.4, 0.3, 0.2, 0.1), prefix="p"):
    """JSONL lines for one month of correlated-blob telemetry."""
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(n, mix)
    W, owners = correlated_workloads(rng, counts)
    P = np.array([20.0, 30.0, 60.0, 40.0]) + rng.normal(size=(len(W), 4)) * np.array(
        [4.0, 5.0, 8.0, 6.0]
    )
    order = rng.permutation(len(W))
    lines = []
    for i, idx in enumerate(order):
        lines.append(
            json.dumps(
                {
                    "point_id": f"{prefix}{month}{i:05d}",
                    "timestamp": month_ts(month, 60.0 * (i + 1)),
                    "entity_id": f"sddc-{int(owners[idx])}",
                    "workload": W[idx].tolist(),
                    "perf": P[idx].tolist(),
                }
            )
        )
    return lines
