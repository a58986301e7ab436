"""Labeling back end: candidate cards, webhook notification, reaction
ingestion with per-annotator dedup, majority-vote aggregation and
annotator distribution statistics.

A card resolves once a quorum of distinct annotators reacted and either
the voting window elapsed or every enrolled annotator has spoken. Ties
drop the label permanently. A resolved card never changes: later
reactions are kept in a side log for audit only, which keeps a replay of
the same reaction log bit-for-bit reproducible.
"""

from __future__ import annotations

import logging
import string
import threading
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterable, Mapping, Sequence

import requests

from .datamodel import (
    AggregatedLabel,
    CardStatus,
    LabelRecord,
    LabelStore,
    MonthKey,
    ReportLog,
    TelemetryPoint,
    TelemetryStore,
    Verdict,
)
from .errors import ConfigError, UnknownCandidate
from .sampling import SamplingDecision

logger = logging.getLogger(__name__)

__all__ = [
    "Reaction",
    "LinkTemplate",
    "CandidateCard",
    "DeliveryReceipt",
    "WebhookPoster",
    "AnnotatorFlag",
    "AnnotatorStats",
    "compose_card",
    "validate_link_templates",
    "evaluate_votes",
    "annotator_stats",
    "LabelingEngine",
]

_TEMPLATE_FIELDS = frozenset({"point_id", "entity_id", "timestamp", "cluster"})


class Reaction(Enum):
    THUMB_UP = "up"
    THUMB_DOWN = "down"
    RETRACTED = "retract"


_REACTION_VERDICT = {
    Reaction.THUMB_UP: Verdict.NORMAL,
    Reaction.THUMB_DOWN: Verdict.ABNORMAL,
}


@dataclass(frozen=True)
class LinkTemplate:
    title: str
    url: str


def validate_link_templates(templates: Sequence[LinkTemplate]) -> None:
    """Reject templates referencing unknown point fields. Runs at startup
    so a bad template never fails per-card."""
    fmt = string.Formatter()
    for tpl in templates:
        for _, name, _, _ in fmt.parse(tpl.url):
            if name is None:
                continue
            base = name.split(".")[0].split("[")[0]
            if base not in _TEMPLATE_FIELDS:
                raise ConfigError(
                    f"link template {tpl.title!r} references unknown field {base!r}"
                )


@dataclass
class CandidateCard:
    """One labeling candidate. status only ever moves Pending -> terminal."""

    point_id: str
    created_at: float
    summary_text: str
    links: tuple[tuple[str, str], ...]
    cluster_index: int
    status: CardStatus = CardStatus.PENDING
    resolved_at: float | None = None
    final_verdict: Verdict | None = None
    vote_counts: dict[Verdict, int] = field(default_factory=dict)

    def webhook_payload(self) -> dict:
        return {
            "text": self.summary_text,
            "point_id": self.point_id,
            "links": [{"title": t, "url": u} for t, u in self.links],
            "cluster": self.cluster_index,
        }

    def to_json_dict(self) -> dict:
        return {
            "point_id": self.point_id,
            "created_at": self.created_at,
            "summary_text": self.summary_text,
            "links": [{"title": t, "url": u} for t, u in self.links],
            "cluster": self.cluster_index,
            "status": self.status.value,
            "resolved_at": self.resolved_at,
            "final_verdict": self.final_verdict.value if self.final_verdict else None,
            "vote_counts": {v.value: c for v, c in self.vote_counts.items()},
        }


def compose_card(
    point: TelemetryPoint,
    decision: SamplingDecision,
    link_templates: Sequence[LinkTemplate] = (),
) -> CandidateCard:
    """Build the single-pane summary card for an accepted point.

    The digest carries the entity, observation time, cluster, and the
    min/mean/max over the point's perf vector; links come from the
    configured templates expanded with the point's fields.
    """
    if not decision.accepted:
        raise ValueError(f"point {point.point_id!r} was not accepted for labeling")
    fields = {
        "point_id": point.point_id,
        "entity_id": point.entity_id,
        "timestamp": int(point.timestamp),
        "cluster": decision.cluster_index,
    }
    perf = point.perf
    workload = point.workload
    summary = (
        f"{point.entity_id} at {int(point.timestamp)} "
        f"(cluster {decision.cluster_index}): "
        f"perf min {min(perf):g} mean {sum(perf) / len(perf):g} max {max(perf):g}; "
        f"workload min {min(workload):g} mean {sum(workload) / len(workload):g} "
        f"max {max(workload):g}"
    )
    links = tuple((tpl.title, tpl.url.format(**fields)) for tpl in link_templates)
    return CandidateCard(
        point_id=point.point_id,
        created_at=point.timestamp,
        summary_text=summary,
        links=links,
        cluster_index=decision.cluster_index,
    )


@dataclass(frozen=True)
class DeliveryReceipt:
    point_id: str
    attempts: int
    outcomes: tuple[str, ...]
    delivered: bool
    permanent_failure: bool

    def to_json_dict(self) -> dict:
        return {
            "point_id": self.point_id,
            "attempts": self.attempts,
            "outcomes": list(self.outcomes),
            "delivered": self.delivered,
            "permanent_failure": self.permanent_failure,
        }


def _requests_transport(url: str, payload: dict, timeout: float = 10.0) -> int:
    return requests.post(url, json=payload, timeout=timeout).status_code


class WebhookPoster:
    """Delivers card payloads to a Slack-compatible JSON webhook.

    5xx responses and transport errors retry with backoff delays of
    1 s, 4 s and 16 s (up to 3 retries after the initial attempt); any
    4xx is a permanent failure with no retry. The transport and sleeper
    are injectable for tests.
    """

    def __init__(
        self,
        url: str,
        transport: Callable[[str, dict], int] | None = None,
        sleeper: Callable[[float], None] = time.sleep,
        delays: Sequence[float] = (1.0, 4.0, 16.0),
    ):
        self.url = url
        self._transport = transport or _requests_transport
        self._sleeper = sleeper
        self._delays = tuple(delays)

    def post(self, card: CandidateCard) -> DeliveryReceipt:
        payload = card.webhook_payload()
        outcomes: list[str] = []
        for attempt, delay in enumerate((None, *self._delays), start=1):
            if delay is not None:
                self._sleeper(delay)
            try:
                status = self._transport(self.url, payload)
            except requests.RequestException as exc:
                outcomes.append(f"error:{type(exc).__name__}")
                continue
            if 200 <= status < 300:
                outcomes.append(str(status))
                return DeliveryReceipt(card.point_id, attempt, tuple(outcomes), True, False)
            outcomes.append(str(status))
            if 400 <= status < 500:
                logger.warning(
                    "webhook rejected card %s with %s, not retrying",
                    card.point_id,
                    status,
                )
                return DeliveryReceipt(card.point_id, attempt, tuple(outcomes), False, True)
        logger.warning("webhook delivery exhausted retries for card %s", card.point_id)
        return DeliveryReceipt(card.point_id, len(outcomes), tuple(outcomes), False, False)


def evaluate_votes(
    records: Sequence[LabelRecord],
    created_at: float,
    now: float,
    quorum: int,
    window_seconds: float,
    enrolled: frozenset[str] | None = None,
) -> tuple[CardStatus, Verdict | None, dict[Verdict, int]]:
    """Pure aggregation rule over the current record set of one card.

    Returns (status, final verdict, vote counts). Resolution needs a
    quorum of distinct annotators plus a closed window (or every enrolled
    annotator having reacted); a closed window without quorum expires the
    card.
    """
    counts = {
        Verdict.NORMAL: sum(1 for r in records if r.verdict is Verdict.NORMAL),
        Verdict.ABNORMAL: sum(1 for r in records if r.verdict is Verdict.ABNORMAL),
    }
    n = len(records)
    window_closed = now >= created_at + window_seconds
    everyone_voted = bool(enrolled) and {r.annotator_id for r in records} >= set(enrolled)
    if n >= quorum and (window_closed or everyone_voted):
        if counts[Verdict.NORMAL] > counts[Verdict.ABNORMAL]:
            return CardStatus.RESOLVED, Verdict.NORMAL, counts
        if counts[Verdict.ABNORMAL] > counts[Verdict.NORMAL]:
            return CardStatus.RESOLVED, Verdict.ABNORMAL, counts
        return CardStatus.DROPPED_TIE, None, counts
    if window_closed:
        return CardStatus.EXPIRED, None, counts
    return CardStatus.PENDING, None, counts


class AnnotatorFlag(Enum):
    NONE = "none"
    OVER_REPORTER = "over_reporter"
    UNDER_REPORTER = "under_reporter"


@dataclass(frozen=True)
class AnnotatorStats:
    annotator_id: str
    total_reactions: int
    abnormal_rate: float
    z_score: float
    flagged: AnnotatorFlag

    def to_json_dict(self) -> dict:
        return {
            "annotator_id": self.annotator_id,
            "total_reactions": self.total_reactions,
            "abnormal_rate": self.abnormal_rate,
            "z_score": self.z_score,
            "flagged": self.flagged.value,
        }


def annotator_stats(
    records: Iterable[LabelRecord],
    min_reactions: int = 10,
    z_threshold: float = 2.0,
) -> list[AnnotatorStats]:
    """Per-annotator abnormal-rate distribution with outlier flags.

    Each eligible annotator (>= min_reactions reactions) is z-scored
    against the other eligible annotators' rates, which keeps a single
    heavy over-reporter from masking itself inside its own population
    statistics. Flagging needs at least two peers to measure spread.
    """
    totals: dict[str, int] = {}
    abnormal: dict[str, int] = {}
    for r in records:
        totals[r.annotator_id] = totals.get(r.annotator_id, 0) + 1
        if r.verdict is Verdict.ABNORMAL:
            abnormal[r.annotator_id] = abnormal.get(r.annotator_id, 0) + 1
    rates = {a: abnormal.get(a, 0) / t for a, t in totals.items()}
    eligible = {a for a, t in totals.items() if t >= min_reactions}
    out = []
    for a in sorted(totals):
        z = 0.0
        flag = AnnotatorFlag.NONE
        if a in eligible:
            peers = [rates[b] for b in eligible if b != a]
            if len(peers) >= 2:
                mu = sum(peers) / len(peers)
                var = sum((r - mu) ** 2 for r in peers) / len(peers)
                sd = var ** 0.5
                if sd > 0:
                    z = (rates[a] - mu) / sd
                if z > z_threshold:
                    flag = AnnotatorFlag.OVER_REPORTER
                elif z < -z_threshold:
                    flag = AnnotatorFlag.UNDER_REPORTER
        out.append(
            AnnotatorStats(
                annotator_id=a,
                total_reactions=totals[a],
                abnormal_rate=rates[a],
                z_score=z,
                flagged=flag,
            )
        )
    return out


class LabelingEngine:
    """Serializes the card lifecycle: creation, reaction ingestion with
    dedup, aggregation and terminal transitions.

    All state derives from the label store plus an append-only card event
    log, so reloading the log reproduces the exact same statuses.
    """

    def __init__(
        self,
        telemetry: TelemetryStore,
        labels: LabelStore,
        *,
        quorum: int = 2,
        window_seconds: float = 72 * 3600.0,
        link_templates: Sequence[LinkTemplate] = (),
        enrolled: Iterable[str] | None = None,
        card_log: ReportLog | None = None,
    ):
        validate_link_templates(link_templates)
        self.telemetry = telemetry
        self.labels = labels
        self.quorum = quorum
        self.window_seconds = window_seconds
        self.link_templates = tuple(link_templates)
        self.enrolled = frozenset(enrolled) if enrolled else None
        self._card_log = card_log
        self._cards: dict[str, CandidateCard] = {}
        self._late_reactions: list[dict] = []
        self._lock = threading.RLock()
        if card_log is not None:
            self._replay(card_log)

    def _replay(self, card_log: ReportLog) -> None:
        for event in card_log.load():
            if event.get("event") == "card":
                obj = event["card"]
                self._cards[obj["point_id"]] = CandidateCard(
                    point_id=obj["point_id"],
                    created_at=obj["created_at"],
                    summary_text=obj["summary_text"],
                    links=tuple((l["title"], l["url"]) for l in obj["links"]),
                    cluster_index=obj["cluster"],
                )
            elif event.get("event") == "status":
                card = self._cards.get(event["point_id"])
                if card is None:
                    continue
                card.status = CardStatus(event["status"])
                card.resolved_at = event["at"]
                verdict = event.get("final_verdict")
                card.final_verdict = Verdict(verdict) if verdict else None
                card.vote_counts = {
                    Verdict(k): v for k, v in event.get("vote_counts", {}).items()
                }

    def _log(self, obj: dict) -> None:
        if self._card_log is not None:
            self._card_log.append(obj)

    def cards(self) -> tuple[CandidateCard, ...]:
        with self._lock:
            return tuple(self._cards.values())

    def pending_cards(self) -> tuple[CandidateCard, ...]:
        with self._lock:
            return tuple(
                c for c in self._cards.values() if c.status is CardStatus.PENDING
            )

    def get_card(self, point_id: str) -> CandidateCard:
        with self._lock:
            card = self._cards.get(point_id)
        if card is None:
            raise UnknownCandidate(point_id)
        return card

    def late_reactions(self) -> tuple[dict, ...]:
        with self._lock:
            return tuple(self._late_reactions)

    def create_card(
        self, point: TelemetryPoint, decision: SamplingDecision
    ) -> CandidateCard:
        with self._lock:
            existing = self._cards.get(point.point_id)
            if existing is not None:
                return existing
            card = compose_card(point, decision, self.link_templates)
            self._cards[card.point_id] = card
            self._log(
                {
                    "event": "card",
                    "card": {
                        "point_id": card.point_id,
                        "created_at": card.created_at,
                        "summary_text": card.summary_text,
                        "links": [{"title": t, "url": u} for t, u in card.links],
                        "cluster": card.cluster_index,
                    },
                }
            )
            return card

    def ingest_reaction(
        self,
        point_id: str,
        annotator_id: str,
        reaction: Reaction,
        timestamp: float,
    ) -> CandidateCard:
        """Apply one reaction and re-evaluate the card.

        Thumb up/down upserts the (point, annotator) record (latest wins);
        a retraction deletes it. Reactions on non-pending cards are logged
        and otherwise ignored.
        """
        with self._lock:
            card = self._cards.get(point_id)
            if card is None:
                raise UnknownCandidate(point_id)
            if card.status is not CardStatus.PENDING:
                entry = {
                    "event": "late_reaction",
                    "point_id": point_id,
                    "annotator_id": annotator_id,
                    "reaction": reaction.value,
                    "at": timestamp,
                }
                self._late_reactions.append(entry)
                self._log(entry)
                logger.info(
                    "late reaction on %s card %s from %s ignored",
                    card.status.value,
                    point_id,
                    annotator_id,
                )
                return card
            if reaction is Reaction.RETRACTED:
                existed = self.labels.retract(point_id, annotator_id, timestamp)
                if not existed:
                    logger.info(
                        "retraction without prior record: %s by %s",
                        point_id,
                        annotator_id,
                    )
            else:
                self.labels.upsert(
                    LabelRecord(
                        point_id=point_id,
                        annotator_id=annotator_id,
                        verdict=_REACTION_VERDICT[reaction],
                        timestamp=timestamp,
                    )
                )
            self._evaluate(card, now=timestamp)
            return card

    def _evaluate(self, card: CandidateCard, now: float) -> None:
        status, verdict, counts = evaluate_votes(
            self.labels.records_for_point(card.point_id),
            card.created_at,
            now,
            self.quorum,
            self.window_seconds,
            self.enrolled,
        )
        if status is CardStatus.PENDING or card.status is not CardStatus.PENDING:
            return
        card.status = status
        card.final_verdict = verdict
        card.vote_counts = counts
        card.resolved_at = now
        self._log(
            {
                "event": "status",
                "point_id": card.point_id,
                "status": status.value,
                "final_verdict": verdict.value if verdict else None,
                "vote_counts": {v.value: c for v, c in counts.items()},
                "at": now,
            }
        )

    def aggregate(self, point_id: str, now: float | None = None) -> AggregatedLabel:
        """Aggregation view of one card: the frozen outcome once terminal,
        otherwise the rule evaluated at `now`."""
        card = self.get_card(point_id)
        with self._lock:
            if card.status is not CardStatus.PENDING:
                return AggregatedLabel(
                    point_id=point_id,
                    final_verdict=card.final_verdict,
                    vote_counts=dict(card.vote_counts),
                    status=card.status,
                )
            status, verdict, counts = evaluate_votes(
                self.labels.records_for_point(point_id),
                card.created_at,
                time.time() if now is None else now,
                self.quorum,
                self.window_seconds,
                self.enrolled,
            )
            return AggregatedLabel(
                point_id=point_id,
                final_verdict=verdict,
                vote_counts=counts,
                status=status,
            )

    def sweep(self, now: float) -> list[CandidateCard]:
        """Re-evaluate every pending card (window expiry happens here when
        no reaction arrives to trigger it). Returns cards that transitioned."""
        changed = []
        with self._lock:
            for card in list(self._cards.values()):
                if card.status is not CardStatus.PENDING:
                    continue
                self._evaluate(card, now=now)
                if card.status is not CardStatus.PENDING:
                    changed.append(card)
        return changed

    def aggregated_labels(self, month: MonthKey | None = None) -> list[AggregatedLabel]:
        """Terminal outcomes, optionally filtered by the labeled point's
        own calendar month."""
        out = []
        with self._lock:
            for card in self._cards.values():
                if card.status in (CardStatus.RESOLVED, CardStatus.DROPPED_TIE):
                    if month is not None:
                        point = self.telemetry.get(card.point_id)
                        if point.month() != month:
                            continue
                    out.append(
                        AggregatedLabel(
                            point_id=card.point_id,
                            final_verdict=card.final_verdict,
                            vote_counts=dict(card.vote_counts),
                            status=card.status,
                        )
                    )
        return out

    def resolved_labels(self, month: MonthKey | None = None) -> list[AggregatedLabel]:
        return [
            l for l in self.aggregated_labels(month) if l.status is CardStatus.RESOLVED
        ]

    def annotator_stats(self) -> list[AnnotatorStats]:
        return annotator_stats(self.labels.records())
