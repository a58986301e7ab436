"""Prepare a throwaway service environment for the console round-trip
test: config file, telemetry points and pending cards.

Usage: python3 seed_service.py ROOT_DIR PORT
"""

import sys
import time
from pathlib import Path

from driftwatch.config import load_config
from driftwatch.datamodel import TelemetryPoint
from driftwatch.sampling import SamplingDecision
from driftwatch.service import ServiceState

CONFIG = """
[labeling]
quorum = 2
window_hours = 72.0
enrolled_annotators = ["alice", "bob"]

[service]
host = "127.0.0.1"
port = {port}
poll_seconds = 3600.0
analytics_seconds = 3600.0
"""


def main(root: Path, port: int) -> None:
    root.mkdir(parents=True, exist_ok=True)
    config_path = root / "pipeline.toml"
    config_path.write_text(CONFIG.format(port=port), encoding="utf-8")
    state = ServiceState(load_config(config_path))
    now = time.time()
    for i in range(3):
        point = TelemetryPoint(
            point_id=f"card-{i}",
            timestamp=now - 120.0 + i,
            entity_id="sddc-9",
            workload=(1.0 + i, 2.0),
            perf=(10.0, 20.0, 30.0),
        )
        state.telemetry.append(point)
        state.engine.create_card(
            point,
            SamplingDecision(
                point_id=point.point_id,
                cluster_index=0,
                acceptance_probability=1.0,
                accepted=True,
                rng_draw=0.0,
            ),
        )
    print(f"seeded {len(state.engine.pending_cards())} cards at {config_path}")


if __name__ == "__main__":
    main(Path(sys.argv[1]), int(sys.argv[2]))
