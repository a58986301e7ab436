"""Long-running service: reaction HTTP API, inbox sampling/posting loop,
and periodic monthly analytics with automatic cluster retraining.

Writes are funneled through the service state (one writer role); the API
and the loops all read consistent snapshots. Webhook failures never stop
the loops: a card whose notification failed stays pending and shows up in
the events log.
"""

from __future__ import annotations

import logging
import threading
import time
from pathlib import Path
from typing import Literal

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel

from .config import PipelineConfig
from .datamodel import (
    CardStatus,
    FeatureKind,
    LabelStore,
    MonthKey,
    ReportLog,
    TelemetryStore,
    Verdict,
)
from .drift import DriftKind, KlMethod, sysperf_drift, workload_drift
from .errors import (
    DriftwatchError,
    EmptyPeriod,
    InsufficientData,
    InsufficientStratifiedSample,
    UnknownCandidate,
)
from .labelflow import CandidateCard, LabelingEngine, Reaction, WebhookPoster
from .sampling import (
    ClusterModel,
    EntropyReport,
    StreamSampler,
    entropy_report,
    train_clusters,
)

logger = logging.getLogger(__name__)

__all__ = ["ServiceState", "build_app", "serve"]


def _kl_method(config: PipelineConfig) -> KlMethod:
    return KlMethod.GAUSSIAN if config.drift.kl_method == "gaussian" else KlMethod.HISTOGRAM


class ServiceState:
    """Owns the stores, the labeling engine, the online sampler and the
    report logs for one deployment."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.telemetry = TelemetryStore(config.telemetry_path)
        self.labels = LabelStore(config.labels_path)
        self.engine = LabelingEngine(
            self.telemetry,
            self.labels,
            quorum=config.labeling.quorum,
            window_seconds=config.labeling.window_seconds,
            link_templates=config.labeling.link_templates,
            enrolled=config.labeling.enrolled_annotators or None,
            card_log=ReportLog(config.cards_path),
        )
        self.decisions_log = ReportLog(config.decisions_path)
        reports = config.reports_dir
        self.workload_log = ReportLog(reports / "workload_drift.jsonl")
        self.sysperf_log = ReportLog(reports / "sysperf_drift.jsonl")
        self.entropy_log = ReportLog(reports / "entropy.jsonl")
        self.events_log = ReportLog(reports / "events.jsonl")
        self.poster: WebhookPoster | None = None
        if config.labeling.webhook_url:
            self.poster = WebhookPoster(config.labeling.webhook_url)
        self._model: ClusterModel | None = None
        if config.model_path.exists():
            self._model = ClusterModel.load(config.model_path)
        self._model_lock = threading.Lock()
        self._sampler: StreamSampler | None = None
        if self._model is not None:
            self._sampler = StreamSampler(
                self._model,
                config.sampling.budget_per_cluster,
                config.sampling.sample_seed,
                window_months=config.sampling.window_months,
            )
        self._processed_inbox: set[str] = set()

    @property
    def model(self) -> ClusterModel | None:
        with self._model_lock:
            return self._model

    def swap_model(self, model: ClusterModel) -> None:
        """Persist the retrained model atomically and hot-swap the sampler."""
        tmp = Path(str(self.config.model_path) + ".tmp")
        tmp.parent.mkdir(parents=True, exist_ok=True)
        model.save(tmp)
        tmp.replace(self.config.model_path)
        with self._model_lock:
            self._model = model
            if self._sampler is None:
                self._sampler = StreamSampler(
                    model,
                    self.config.sampling.budget_per_cluster,
                    self.config.sampling.sample_seed,
                    window_months=self.config.sampling.window_months,
                )
            else:
                self._sampler.swap_model(model)

    # ---------------- sampling / posting loop ----------------

    def run_sampling_cycle(self, now: float | None = None) -> int:
        """Ingest any new inbox files, run sampling decisions on the newly
        accepted points, create and post cards. Returns cards created."""
        now = time.time() if now is None else now
        created = 0
        inbox = self.config.inbox_dir
        if inbox.is_dir():
            for file in sorted(inbox.glob("*.jsonl")):
                if file.name in self._processed_inbox:
                    continue
                created += self._process_inbox_file(file)
                self._processed_inbox.add(file.name)
        self.engine.sweep(now)
        return created

    def _process_inbox_file(self, file: Path) -> int:
        before = len(self.telemetry)
        report = self.telemetry.ingest_points(file)
        logger.info(
            "inbox %s: %d accepted, %d rejected",
            file.name,
            report.accepted,
            report.rejected_count,
        )
        if self._sampler is None:
            logger.warning("no cluster model loaded; inbox points stored, not sampled")
            return 0
        new_points = self.telemetry.points()[before:]
        created = 0
        for point in new_points:
            decision = self._sampler.decide(point)
            if decision is None:
                continue
            self.decisions_log.append(decision.to_json_dict())
            if not decision.accepted:
                continue
            card = self.engine.create_card(point, decision)
            created += 1
            if self.poster is not None:
                try:
                    receipt = self.poster.post(card)
                except Exception:
                    logger.exception("webhook delivery crashed for %s", card.point_id)
                    continue
                if not receipt.delivered:
                    self.events_log.append(
                        {"event": "delivery_failed", **receipt.to_json_dict()}
                    )
        return created

    # ---------------- monthly analytics ----------------

    def _history(self, log: ReportLog) -> tuple[list[MonthKey], list[float]]:
        """Latest non-degenerate KL per month from a drift report log."""
        latest: dict[MonthKey, float] = {}
        for obj in log.load():
            if obj.get("kl") is None:
                continue
            latest[MonthKey.parse(obj["month"])] = obj["kl"]["value"]
        months = sorted(latest)
        return months, [latest[m] for m in months]

    def history_before(self, log: ReportLog, month: MonthKey) -> list[float]:
        months, values = self._history(log)
        return [v for m, v in zip(months, values) if m < month]

    def latest_entropy_before(self, month: MonthKey):
        latest: dict[MonthKey, dict] = {}
        for obj in self.entropy_log.load():
            latest[MonthKey.parse(obj["month"])] = obj
        candidates = [m for m in latest if m < month]
        if not candidates:
            return None
        return latest[max(candidates)]

    def run_monthly_analytics(self, now: float | None = None) -> list[dict]:
        """Compute entropy and both drift reports for the last complete
        month, persist them, and react to retrain triggers. Skips months
        already analyzed. Returns the emitted events."""
        now = time.time() if now is None else now
        month = MonthKey.from_timestamp(now).prev()
        events: list[dict] = []
        if self.model is None:
            return events
        analyzed = {obj["month"] for obj in self.entropy_log.load()}
        if str(month) in analyzed:
            return events
        events.extend(self._entropy_step(month))
        events.extend(self._drift_step(month))
        for event in events:
            self.events_log.append(event)
        return events

    def _entropy_step(self, month: MonthKey) -> list[dict]:
        model = self.model
        assert model is not None
        previous_obj = self.latest_entropy_before(month)
        previous = None
        if previous_obj is not None and previous_obj["status"] == "ok":
            previous = EntropyReport.from_json_dict(previous_obj)
        labels = self.engine.aggregated_labels(month)
        try:
            report = entropy_report(
                month,
                labels,
                self.telemetry,
                model,
                previous,
                trigger_drop=self.config.sampling.trigger_drop,
                base=self.config.sampling.entropy_base,
            )
        except DriftwatchError as exc:
            logger.warning("entropy for %s failed: %s", month, exc)
            return []
        self.entropy_log.append(report.to_json_dict())
        if report.retrain_triggered:
            return self._retrain(month, reason="entropy_drop")
        return []

    def _drift_step(self, month: MonthKey) -> list[dict]:
        model = self.model
        assert model is not None
        events: list[dict] = []
        method = _kl_method(self.config)
        try:
            report = workload_drift(
                self.telemetry,
                month,
                self.history_before(self.workload_log, month),
                method=method,
                bins_per_axis=self.config.drift.histogram_bins,
                direction=self.config.drift.direction,
            )
            self.workload_log.append(report.to_json_dict())
            if report.exceeded:
                events.extend(self._retrain(month, reason="workload_drift"))
        except (EmptyPeriod, InsufficientData) as exc:
            logger.warning("workload drift for %s skipped: %s", month, exc)
        try:
            report = sysperf_drift(
                self.telemetry,
                month,
                model,
                self.history_before(self.sysperf_log, month),
                self.config.drift.seed,
                method=method,
                bins_per_axis=self.config.drift.histogram_bins,
                direction=self.config.drift.direction,
            )
            self.sysperf_log.append(report.to_json_dict())
            if report.exceeded:
                # sysperf drift is routed to humans, never to retraining
                events.append(
                    {
                        "event": "sysperf_flagged_for_review",
                        "month": str(month),
                        "kl": report.kl.value if report.kl else None,
                    }
                )
        except (EmptyPeriod, InsufficientData, InsufficientStratifiedSample) as exc:
            logger.warning("sysperf drift for %s skipped: %s", month, exc)
        return events

    def _retrain(self, month: MonthKey, reason: str) -> list[dict]:
        """Retrain the cluster model on the trailing window ending at
        `month` and hot-swap it."""
        window = self.config.sampling.retrain_window_months
        months = []
        cursor = month
        for _ in range(window):
            months.append(cursor)
            cursor = cursor.prev()
        matrices = []
        for m in reversed(months):
            try:
                matrices.append(self.telemetry.month_matrix(m, FeatureKind.WORKLOAD))
            except EmptyPeriod:
                continue
        if not matrices:
            logger.warning("retrain trigger for %s found no data", month)
            return [{"event": "retrain_skipped", "month": str(month), "reason": reason}]
        X = np.vstack(matrices)
        try:
            model = train_clusters(
                X,
                self.config.sampling.k,
                self.config.sampling.train_seed,
                training_window=(months[-1], months[0]),
            )
        except DriftwatchError as exc:
            logger.warning("retrain for %s failed: %s", month, exc)
            return [{"event": "retrain_failed", "month": str(month), "reason": str(exc)}]
        self.swap_model(model)
        logger.info("cluster model retrained after %s (%s)", month, reason)
        return [{"event": "retrained", "month": str(month), "reason": reason}]


class ReactionBody(BaseModel):
    point_id: str
    annotator_id: str
    reaction: Literal["up", "down", "retract"]


def _card_view(
    state: ServiceState, card: CandidateCard, annotator: str | None
) -> dict:
    records = state.labels.records_for_point(card.point_id)
    tallies = {
        "up": sum(1 for r in records if r.verdict is Verdict.NORMAL),
        "down": sum(1 for r in records if r.verdict is Verdict.ABNORMAL),
    }
    own = None
    if annotator is not None:
        for r in records:
            if r.annotator_id == annotator:
                own = "up" if r.verdict is Verdict.NORMAL else "down"
    view = card.to_json_dict()
    view["tallies"] = tallies
    view["own_reaction"] = own
    return view


def build_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="driftwatch", docs_url=None, redoc_url=None)

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "model_loaded": state.model is not None}

    @app.post("/reactions")
    def post_reaction(body: ReactionBody) -> dict:
        try:
            card = state.engine.ingest_reaction(
                body.point_id,
                body.annotator_id,
                Reaction(body.reaction),
                timestamp=time.time(),
            )
        except UnknownCandidate:
            raise HTTPException(status_code=404, detail="unknown_candidate") from None
        return _card_view(state, card, body.annotator_id)

    @app.get("/candidates")
    def list_candidates(
        status: str | None = Query(default=None),
        annotator: str | None = Query(default=None),
        limit: int = Query(default=50, ge=1, le=500),
        offset: int = Query(default=0, ge=0),
    ) -> dict:
        cards = sorted(state.engine.cards(), key=lambda c: (c.created_at, c.point_id))
        if status is not None:
            try:
                wanted = CardStatus(status)
            except ValueError:
                raise HTTPException(status_code=422, detail="unknown status") from None
            cards = [c for c in cards if c.status is wanted]
        total = len(cards)
        page = cards[offset : offset + limit]
        return {
            "total": total,
            "offset": offset,
            "cards": [_card_view(state, c, annotator) for c in page],
        }

    @app.get("/candidates/{point_id}")
    def get_candidate(point_id: str, annotator: str | None = None) -> dict:
        try:
            card = state.engine.get_card(point_id)
        except UnknownCandidate:
            raise HTTPException(status_code=404, detail="unknown_candidate") from None
        return _card_view(state, card, annotator)

    @app.get("/labels")
    def get_labels(month: str | None = None, point_id: str | None = None) -> dict:
        records = state.labels.records()
        if month is not None:
            try:
                key = MonthKey.parse(month)
            except ValueError:
                raise HTTPException(status_code=422, detail="bad month") from None
            records = tuple(
                r for r in records if MonthKey.from_timestamp(r.timestamp) == key
            )
        if point_id is not None:
            records = tuple(r for r in records if r.point_id == point_id)
        ordered = sorted(records, key=lambda r: (r.timestamp, r.point_id, r.annotator_id))
        return {"labels": [r.to_json_dict() for r in ordered]}

    @app.get("/annotators/stats")
    def get_annotator_stats() -> dict:
        return {"annotators": [s.to_json_dict() for s in state.engine.annotator_stats()]}

    @app.get("/reports/drift")
    def get_drift_reports(kind: str = Query(default="workload")) -> dict:
        try:
            parsed = DriftKind(kind)
        except ValueError:
            raise HTTPException(status_code=422, detail="unknown kind") from None
        log = state.workload_log if parsed is DriftKind.WORKLOAD else state.sysperf_log
        return {"reports": log.load()}

    return app


def _loop(name: str, interval: float, stop: threading.Event, step) -> None:
    while not stop.is_set():
        try:
            step()
        except Exception:
            logger.exception("%s loop iteration failed", name)
        stop.wait(interval)


def serve(config: PipelineConfig) -> None:
    """Run the HTTP API plus the sampling and analytics loops until
    interrupted."""
    import uvicorn

    state = ServiceState(config)
    stop = threading.Event()
    threads = [
        threading.Thread(
            target=_loop,
            args=("sampling", config.service.poll_seconds, stop, state.run_sampling_cycle),
            daemon=True,
        ),
        threading.Thread(
            target=_loop,
            args=(
                "analytics",
                config.service.analytics_seconds,
                stop,
                state.run_monthly_analytics,
            ),
            daemon=True,
        ),
    ]
    for t in threads:
        t.start()
    try:
        uvicorn.run(
            build_app(state),
            host=config.service.host,
            port=config.service.port,
            log_level="warning",
        )
    finally:
        stop.set()
