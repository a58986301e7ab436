"""Domain types and append-only persistence for telemetry, labels and reports.

Storage is newline-delimited JSON on disk with an in-memory index. One
writer, many readers: mutations take the store lock, readers get immutable
snapshots. Analytic code never touches the files directly.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import EmptyPeriod, UnknownPoint

__all__ = [
    "Verdict",
    "FeatureKind",
    "CardStatus",
    "TelemetryPoint",
    "LabelRecord",
    "AggregatedLabel",
    "MonthKey",
    "IngestReport",
    "TelemetryStore",
    "LabelStore",
    "ReportLog",
]


class Verdict(Enum):
    """Binary label: thumbs-up maps to NORMAL, thumbs-down to ABNORMAL."""

    NORMAL = "normal"
    ABNORMAL = "abnormal"


class FeatureKind(Enum):
    WORKLOAD = "workload"
    PERF = "perf"


class CardStatus(Enum):
    """Lifecycle of a labeling candidate. Pending cards may only move to
    one of the three terminal states."""

    PENDING = "pending"
    RESOLVED = "resolved"
    DROPPED_TIE = "dropped_tie"
    EXPIRED = "expired"


@dataclass(frozen=True, order=True)
class MonthKey:
    """Calendar month in UTC. Total order; successor/predecessor defined."""

    year: int
    month: int

    def __post_init__(self) -> None:
        if not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")

    @classmethod
    def from_timestamp(cls, ts: float) -> "MonthKey":
        dt = datetime.fromtimestamp(ts, tz=timezone.utc)
        return cls(dt.year, dt.month)

    @classmethod
    def parse(cls, text: str) -> "MonthKey":
        y, _, m = text.partition("-")
        return cls(int(y), int(m))

    def next(self) -> "MonthKey":
        if self.month == 12:
            return MonthKey(self.year + 1, 1)
        return MonthKey(self.year, self.month + 1)

    def prev(self) -> "MonthKey":
        if self.month == 1:
            return MonthKey(self.year - 1, 12)
        return MonthKey(self.year, self.month - 1)

    def start_timestamp(self) -> float:
        return datetime(self.year, self.month, 1, tzinfo=timezone.utc).timestamp()

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


@dataclass(frozen=True)
class TelemetryPoint:
    """One timestamped observation: a workload vector and a perf vector."""

    point_id: str
    timestamp: float
    entity_id: str
    workload: tuple[float, ...]
    perf: tuple[float, ...]

    def month(self) -> MonthKey:
        return MonthKey.from_timestamp(self.timestamp)

    def to_json_dict(self) -> dict:
        return {
            "point_id": self.point_id,
            "timestamp": self.timestamp,
            "entity_id": self.entity_id,
            "workload": list(self.workload),
            "perf": list(self.perf),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "TelemetryPoint":
        return cls(
            point_id=str(obj["point_id"]),
            timestamp=float(obj["timestamp"]),
            entity_id=str(obj["entity_id"]),
            workload=tuple(float(v) for v in obj["workload"]),
            perf=tuple(float(v) for v in obj["perf"]),
        )


@dataclass(frozen=True)
class LabelRecord:
    """One annotator's current verdict on one point. The store keeps at
    most one record per (point_id, annotator_id); later events replace
    earlier ones."""

    point_id: str
    annotator_id: str
    verdict: Verdict
    timestamp: float

    def to_json_dict(self) -> dict:
        return {
            "point_id": self.point_id,
            "annotator_id": self.annotator_id,
            "verdict": self.verdict.value,
            "timestamp": self.timestamp,
        }


@dataclass(frozen=True)
class AggregatedLabel:
    """Majority-vote outcome for one candidate point."""

    point_id: str
    final_verdict: Verdict | None
    vote_counts: dict[Verdict, int]
    status: CardStatus

    def __post_init__(self) -> None:
        up = self.vote_counts.get(Verdict.NORMAL, 0)
        down = self.vote_counts.get(Verdict.ABNORMAL, 0)
        if self.status is CardStatus.RESOLVED and up == down:
            raise ValueError("resolved label requires a strict majority")
        if self.status is CardStatus.DROPPED_TIE and up != down:
            raise ValueError("dropped tie requires equal counts")

    def to_json_dict(self) -> dict:
        return {
            "point_id": self.point_id,
            "final_verdict": self.final_verdict.value if self.final_verdict else None,
            "vote_counts": {v.value: c for v, c in self.vote_counts.items()},
            "status": self.status.value,
        }


@dataclass
class IngestReport:
    """Outcome of one ingestion pass. Rejections never abort the stream."""

    accepted: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)

    def reject(self, line_no: int, reason: str) -> None:
        self.rejected.append((line_no, reason))

    @property
    def rejected_count(self) -> int:
        return len(self.rejected)

    def reasons(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for _, reason in self.rejected:
            out[reason] = out.get(reason, 0) + 1
        return out


def _iter_jsonl(source: str | Path | Iterable[str]) -> Iterator[tuple[int, str]]:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            for i, line in enumerate(fh, start=1):
                if line.strip():
                    yield i, line
    else:
        for i, line in enumerate(source, start=1):
            if line.strip():
                yield i, line


class TelemetryStore:
    """Append-only point store. Dimensionalities (d_w, d_p) are a
    dataset-level contract fixed by the first accepted record (or an
    explicit header) and enforced on every subsequent ingest."""

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._points: list[TelemetryPoint] = []
        self._by_id: dict[str, TelemetryPoint] = {}
        self._dims: tuple[int, int] | None = None
        if self._path is not None and self._path.exists():
            self._replay()

    def _replay(self) -> None:
        assert self._path is not None
        with open(self._path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                point = TelemetryPoint.from_json_dict(obj)
                self._index(point)

    def _index(self, point: TelemetryPoint) -> None:
        self._points.append(point)
        self._by_id[point.point_id] = point
        if self._dims is None:
            self._dims = (len(point.workload), len(point.perf))

    @property
    def dims(self) -> tuple[int, int] | None:
        return self._dims

    def __len__(self) -> int:
        return len(self._points)

    def __contains__(self, point_id: str) -> bool:
        return point_id in self._by_id

    def get(self, point_id: str) -> TelemetryPoint:
        try:
            return self._by_id[point_id]
        except KeyError:
            raise UnknownPoint(point_id) from None

    def points(self) -> tuple[TelemetryPoint, ...]:
        with self._lock:
            return tuple(self._points)

    def _validate(self, point: TelemetryPoint) -> str | None:
        if point.point_id in self._by_id:
            return "duplicate"
        values = point.workload + point.perf
        if not all(math.isfinite(v) for v in values):
            return "non-finite"
        if self._dims is not None:
            if (len(point.workload), len(point.perf)) != self._dims:
                return "dimension-mismatch"
        return None

    def append(self, point: TelemetryPoint) -> None:
        """Append one point. Raises ValueError on any ingest-reject reason."""
        with self._lock:
            reason = self._validate(point)
            if reason is not None:
                raise ValueError(f"rejected point {point.point_id!r}: {reason}")
            self._index(point)
            self._persist(point)

    def _persist(self, point: TelemetryPoint) -> None:
        if self._path is None:
            return
        self._path.parent.mkdir(parents=True, exist_ok=True)
        with open(self._path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(point.to_json_dict()) + "\n")

    def ingest_points(self, source: str | Path | Iterable[str]) -> IngestReport:
        """Ingest a telemetry JSONL stream.

        An optional leading header object `{"d_w": int, "d_p": int}` pins
        dimensionalities before the first record; otherwise the first
        accepted record sets them. Bad records are rejected with a reason
        and the stream continues.
        """
        report = IngestReport()
        with self._lock:
            for line_no, line in _iter_jsonl(source):
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError:
                    report.reject(line_no, "malformed")
                    continue
                if "point_id" not in obj and ("d_w" in obj or "d_p" in obj):
                    declared = (int(obj.get("d_w", -1)), int(obj.get("d_p", -1)))
                    if self._dims is None:
                        self._dims = declared
                    elif self._dims != declared:
                        report.reject(line_no, "dimension-mismatch")
                    continue
                try:
                    point = TelemetryPoint.from_json_dict(obj)
                except (KeyError, TypeError, ValueError):
                    report.reject(line_no, "malformed")
                    continue
                reason = self._validate(point)
                if reason is not None:
                    report.reject(line_no, reason)
                    continue
                self._index(point)
                self._persist(point)
                report.accepted += 1
        return report

    def months(self) -> list[MonthKey]:
        with self._lock:
            return sorted({p.month() for p in self._points})

    def points_in_month(self, month: MonthKey) -> list[TelemetryPoint]:
        """Points of one UTC calendar month, ordered by (timestamp, point_id)."""
        with self._lock:
            rows = [p for p in self._points if p.month() == month]
        if not rows:
            raise EmptyPeriod(str(month))
        rows.sort(key=lambda p: (p.timestamp, p.point_id))
        return rows

    def month_matrix(self, month: MonthKey, kind: FeatureKind) -> np.ndarray:
        """Feature matrix (n x d) for one month, deterministic row order."""
        rows = self.points_in_month(month)
        if kind is FeatureKind.WORKLOAD:
            return np.array([p.workload for p in rows], dtype=float)
        return np.array([p.perf for p in rows], dtype=float)


# Module-level aliases matching the operation names used elsewhere in docs.
def ingest_points(store: TelemetryStore, source) -> IngestReport:
    return store.ingest_points(source)


def points_in_month(store: TelemetryStore, month: MonthKey, kind: FeatureKind) -> np.ndarray:
    return store.month_matrix(month, kind)


_RETRACTED = "retracted"


class LabelStore:
    """Event-sourced label store. The on-disk log is append-only (verdict
    events plus retraction tombstones); the in-memory state keeps the
    latest record per (point_id, annotator_id)."""

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._current: dict[tuple[str, str], LabelRecord] = {}
        if self._path is not None and self._path.exists():
            self._replay()

    def _replay(self) -> None:
        assert self._path is not None
        with open(self._path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                self._apply(obj)

    def _apply(self, obj: dict) -> None:
        key = (str(obj["point_id"]), str(obj["annotator_id"]))
        if obj["verdict"] == _RETRACTED:
            self._current.pop(key, None)
        else:
            self._current[key] = LabelRecord(
                point_id=key[0],
                annotator_id=key[1],
                verdict=Verdict(obj["verdict"]),
                timestamp=float(obj["timestamp"]),
            )

    def _persist(self, obj: dict) -> None:
        if self._path is None:
            return
        self._path.parent.mkdir(parents=True, exist_ok=True)
        with open(self._path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(obj) + "\n")

    def upsert(self, record: LabelRecord) -> None:
        """Store or replace the (point, annotator) record. Latest wins."""
        with self._lock:
            obj = record.to_json_dict()
            self._apply(obj)
            self._persist(obj)

    def retract(self, point_id: str, annotator_id: str, timestamp: float) -> bool:
        """Delete the (point, annotator) record if present. Returns whether
        a record existed; the tombstone is logged either way."""
        with self._lock:
            existed = (point_id, annotator_id) in self._current
            obj = {
                "point_id": point_id,
                "annotator_id": annotator_id,
                "verdict": _RETRACTED,
                "timestamp": timestamp,
            }
            self._apply(obj)
            self._persist(obj)
            return existed

    def ingest_labels(self, source: str | Path | Iterable[str]) -> IngestReport:
        """Ingest a labels JSONL file (verdict must be normal|abnormal)."""
        report = IngestReport()
        for line_no, line in _iter_jsonl(source):
            try:
                obj = json.loads(line)
                record = LabelRecord(
                    point_id=str(obj["point_id"]),
                    annotator_id=str(obj["annotator_id"]),
                    verdict=Verdict(obj["verdict"]),
                    timestamp=float(obj["timestamp"]),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                report.reject(line_no, "malformed")
                continue
            self.upsert(record)
            report.accepted += 1
        return report

    def __len__(self) -> int:
        return len(self._current)

    def records(self) -> tuple[LabelRecord, ...]:
        with self._lock:
            return tuple(self._current.values())

    def records_for_point(self, point_id: str) -> tuple[LabelRecord, ...]:
        with self._lock:
            return tuple(r for r in self._current.values() if r.point_id == point_id)

    def records_in_month(self, month: MonthKey) -> tuple[LabelRecord, ...]:
        with self._lock:
            return tuple(
                r
                for r in self._current.values()
                if MonthKey.from_timestamp(r.timestamp) == month
            )


class ReportLog:
    """Append-only JSONL log for reports and operational events."""

    def __init__(self, path: str | Path):
        self._path = Path(path)
        self._lock = threading.Lock()

    def append(self, obj: dict) -> None:
        with self._lock:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            with open(self._path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(obj) + "\n")

    def load(self) -> list[dict]:
        if not self._path.exists():
            return []
        out = []
        with self._lock, open(self._path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    out.append(json.loads(line))
        return out
