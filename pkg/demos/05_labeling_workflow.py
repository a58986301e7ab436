"""
The reaction-based labeling workflow
====================================

Accepted points become candidate cards: a one-glance summary plus links,
posted to a Slack-compatible webhook. Engineers react thumb-up (normal)
or thumb-down (abnormal); reactions dedup per annotator, aggregate by
majority vote once a quorum is in and the window closes, and ties drop
the label.
"""

from driftwatch import LabelingEngine, Reaction, SamplingDecision, annotator_stats
from driftwatch.datamodel import LabelStore, TelemetryPoint, TelemetryStore
from driftwatch.labelflow import LinkTemplate, compose_card

telemetry = TelemetryStore()
labels = LabelStore()
engine = LabelingEngine(
    telemetry,
    labels,
    quorum=2,
    window_seconds=3600.0,
    link_templates=[LinkTemplate("dashboard", "https://dash.example/{entity_id}")],
)

T0 = 1_700_000_000.0
for i in range(3):
    telemetry.append(
        TelemetryPoint(f"p{i}", T0 + i, "sddc-42", (1.0, 2.0), (10.0, 20.0, 30.0))
    )
    engine.create_card(
        telemetry.get(f"p{i}"),
        SamplingDecision(f"p{i}", cluster_index=1, acceptance_probability=0.2,
                         accepted=True, rng_draw=0.05),
    )

card = engine.get_card("p0")
print("card summary:", card.summary_text)
print("card links:  ", card.links)
print("webhook body:", card.webhook_payload())

# p0: clean majority; p1: tie; p2: only one vote
engine.ingest_reaction("p0", "alice", Reaction.THUMB_UP, T0 + 10)
engine.ingest_reaction("p0", "bob", Reaction.THUMB_UP, T0 + 20)
engine.ingest_reaction("p0", "carol", Reaction.THUMB_DOWN, T0 + 30)
engine.ingest_reaction("p1", "alice", Reaction.THUMB_DOWN, T0 + 40)
engine.ingest_reaction("p1", "bob", Reaction.THUMB_UP, T0 + 50)
engine.ingest_reaction("p2", "alice", Reaction.THUMB_UP, T0 + 60)

# changing one's mind replaces the earlier record rather than duplicating
engine.ingest_reaction("p0", "carol", Reaction.THUMB_UP, T0 + 70)

engine.sweep(T0 + 3700.0)  # the voting window closes
for pid in ("p0", "p1", "p2"):
    card = engine.get_card(pid)
    verdict = card.final_verdict.value if card.final_verdict else "-"
    print(f"{pid}: {card.status.value:<12} verdict={verdict:<8} votes={card.vote_counts}")

print("\nannotator distributions:")
for s in annotator_stats(labels.records(), min_reactions=1):
    print(f"  {s.annotator_id}: rate={s.abnormal_rate:.2f} z={s.z_score:+.2f} {s.flagged.value}")
