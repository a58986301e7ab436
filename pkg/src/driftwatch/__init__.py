"""Data-quality tooling for ML-based performance anomaly detection:
balanced label curation via cluster sampling and voting, plus monthly
distribution-drift monitoring with retraining triggers."""

from .datamodel import (
    AggregatedLabel,
    CardStatus,
    FeatureKind,
    LabelRecord,
    LabelStore,
    MonthKey,
    TelemetryPoint,
    TelemetryStore,
    Verdict,
)
from .dimreduce import PcaModel, fit_pca, transform
from .drift import (
    DriftAction,
    DriftKind,
    DriftReport,
    KlEstimate,
    KlMethod,
    compute_threshold,
    kl_gaussian,
    kl_histogram,
    reduced_kl,
    sysperf_drift,
    workload_drift,
)
from .evaluation import BootstrapSummary, Confusion, bootstrap_f1, f1
from .labelflow import (
    AnnotatorStats,
    CandidateCard,
    LabelingEngine,
    Reaction,
    WebhookPoster,
    annotator_stats,
    compose_card,
)
from .sampling import (
    ClusterModel,
    EntropyReport,
    SamplingDecision,
    StreamSampler,
    acceptance_probability,
    assign,
    entropy_from_counts,
    entropy_report,
    sample_stream,
    train_clusters,
)

__version__ = "0.1.0"
