"""Workload cluster sampling: train clusters on history, accept incoming
points with probability inverse to their cluster's population, and watch
label-diversity entropy for the retrain trigger.

Clustering runs in the 2-D PCA space so cluster geometry matches the
visualized space. Acceptance probability is min(1, budget / population),
which makes the expected number of accepted points per cluster equal to
the budget for every cluster at least as populous as the budget.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .datamodel import MonthKey, TelemetryPoint, TelemetryStore
from .dimreduce import PcaModel, fit_pca, transform
from .errors import InsufficientData
from .errors import InvalidDimension  # noqa: F401  (re-raised from transform)

__all__ = [
    "ClusterModel",
    "SamplingDecision",
    "EntropyStatus",
    "EntropyReport",
    "train_clusters",
    "assign",
    "assign_many",
    "acceptance_probability",
    "StreamSampler",
    "sample_stream",
    "entropy_from_counts",
    "entropy_report",
]

_LLOYD_TOL = 1e-6
_LLOYD_MAX_ITER = 300


@dataclass(frozen=True)
class ClusterModel:
    """Fitted sampler state: PCA into 2-D plus k-means centroids and the
    training-population count per cluster."""

    pca: PcaModel
    centroids: np.ndarray
    populations: np.ndarray
    trained_at: float
    training_window: tuple[MonthKey, MonthKey] | None = None
    requested_k: int | None = None

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def reduced_k(self) -> bool:
        """True when duplicate training points forced fewer clusters than
        requested."""
        return self.requested_k is not None and self.requested_k != self.k

    def to_json_dict(self) -> dict:
        window = None
        if self.training_window is not None:
            window = [str(self.training_window[0]), str(self.training_window[1])]
        return {
            "pca": self.pca.to_json_dict(),
            "centroids": self.centroids.tolist(),
            "populations": self.populations.tolist(),
            "trained_at": self.trained_at,
            "training_window": window,
            "requested_k": self.requested_k,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ClusterModel":
        window = obj.get("training_window")
        parsed = None
        if window is not None:
            parsed = (MonthKey.parse(window[0]), MonthKey.parse(window[1]))
        return cls(
            pca=PcaModel.from_json_dict(obj["pca"]),
            centroids=np.asarray(obj["centroids"], dtype=float),
            populations=np.asarray(obj["populations"], dtype=float),
            trained_at=float(obj["trained_at"]),
            training_window=parsed,
            requested_k=obj.get("requested_k"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ClusterModel":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class SamplingDecision:
    """One audit record per streamed point. accepted holds exactly when
    rng_draw < acceptance_probability."""

    point_id: str
    cluster_index: int
    acceptance_probability: float
    accepted: bool
    rng_draw: float
    starved: bool = False
    month: MonthKey | None = None

    def to_json_dict(self) -> dict:
        return {
            "point_id": self.point_id,
            "cluster": self.cluster_index,
            "probability": self.acceptance_probability,
            "accepted": self.accepted,
            "rng_draw": self.rng_draw,
            "starved": self.starved,
            "month": str(self.month) if self.month is not None else None,
        }


class EntropyStatus(Enum):
    OK = "ok"
    NO_LABELS = "no_labels"


@dataclass(frozen=True)
class EntropyReport:
    """Label-diversity entropy over workload clusters for one month."""

    month: MonthKey
    cluster_counts: np.ndarray
    entropy_bits: float
    previous_entropy_bits: float | None
    retrain_triggered: bool
    status: EntropyStatus = EntropyStatus.OK

    def to_json_dict(self) -> dict:
        return {
            "month": str(self.month),
            "cluster_counts": [int(c) for c in self.cluster_counts],
            "entropy_bits": self.entropy_bits,
            "previous_entropy_bits": self.previous_entropy_bits,
            "retrain_triggered": self.retrain_triggered,
            "status": self.status.value,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "EntropyReport":
        return cls(
            month=MonthKey.parse(obj["month"]),
            cluster_counts=np.asarray(obj["cluster_counts"], dtype=float),
            entropy_bits=float(obj["entropy_bits"]),
            previous_entropy_bits=obj.get("previous_entropy_bits"),
            retrain_triggered=bool(obj["retrain_triggered"]),
            status=EntropyStatus(obj["status"]),
        )


def _pairwise_sq_dists(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]), dtype=float)
    centroids[0] = X[int(rng.integers(n))]
    d2 = ((X - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        # zero-distance points (already-chosen duplicates) get probability 0,
        # so the k distinct centroids guaranteed by the caller stay distinct
        probs = d2 / d2.sum()
        centroids[i] = X[int(rng.choice(n, p=probs))]
        d2 = np.minimum(d2, ((X - centroids[i]) ** 2).sum(axis=1))
    return centroids


def _lloyd(X: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    k = centroids.shape[0]
    for _ in range(_LLOYD_MAX_ITER):
        d2 = _pairwise_sq_dists(X, centroids)
        labels = np.argmin(d2, axis=1)
        new = centroids.copy()
        for j in range(k):
            members = X[labels == j]
            if len(members):
                new[j] = members.mean(axis=0)
            else:
                # deterministic reseed: point farthest from its assigned centroid
                new[j] = X[int(np.argmax(d2[np.arange(len(X)), labels]))]
        movement = float(np.max(np.linalg.norm(new - centroids, axis=1)))
        centroids = new
        if movement < _LLOYD_TOL:
            break
    labels = np.argmin(_pairwise_sq_dists(X, centroids), axis=1)
    return centroids, labels


def train_clusters(
    X_workload: np.ndarray,
    K: int,
    seed: int,
    *,
    trained_at: float | None = None,
    training_window: tuple[MonthKey, MonthKey] | None = None,
) -> ClusterModel:
    """Fit the 2-D PCA and run seeded k-means++ / Lloyd to convergence.

    If duplicate points leave fewer than K distinct reduced points, K is
    reduced to that count and the model is flagged (requested_k keeps the
    original request). Raises InsufficientData when n < K.
    """
    X = np.asarray(X_workload, dtype=float)
    if X.ndim != 2:
        raise InvalidDimension(f"expected 2-D matrix, got shape {X.shape}")
    n = X.shape[0]
    if K < 1:
        raise InsufficientData(f"K must be >= 1, got {K}")
    if n < K:
        raise InsufficientData(f"need at least K={K} rows, got {n}")
    pca = fit_pca(X, k=min(2, X.shape[1]))
    Z = transform(pca, X)
    n_distinct = len(np.unique(Z, axis=0))
    k_eff = min(K, n_distinct)
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(Z, k_eff, rng)
    centroids, labels = _lloyd(Z, centroids)
    populations = np.bincount(labels, minlength=k_eff).astype(float)
    return ClusterModel(
        pca=pca,
        centroids=centroids,
        populations=populations,
        trained_at=time.time() if trained_at is None else trained_at,
        training_window=training_window,
        requested_k=K,
    )


def assign(model: ClusterModel, workload: Sequence[float] | np.ndarray) -> int:
    """Index of the nearest centroid in reduced space; ties go to the
    lowest index."""
    z = transform(model.pca, np.asarray(workload, dtype=float))
    d2 = ((model.centroids - z[0]) ** 2).sum(axis=1)
    return int(np.argmin(d2))


def assign_many(model: ClusterModel, X: np.ndarray) -> np.ndarray:
    """Vectorized assign over the rows of an (n, d_w) matrix."""
    Z = transform(model.pca, np.asarray(X, dtype=float))
    return np.argmin(_pairwise_sq_dists(Z, model.centroids), axis=1)


def acceptance_probability(
    model: ClusterModel,
    cluster_index: int,
    budget_per_cluster: float,
    window_population: Sequence[float] | np.ndarray,
) -> float:
    """min(1, budget / window population of the cluster).

    A zero population returns 1.0: a cluster with no recent traffic is a
    new or rare pattern and must be labeled when it shows up.
    """
    if not 0 <= cluster_index < model.k:
        raise ValueError(f"cluster index {cluster_index} outside [0, {model.k})")
    pop = float(window_population[cluster_index])
    if pop < 0:
        raise ValueError(f"negative population for cluster {cluster_index}")
    if pop == 0.0:
        return 1.0
    return min(1.0, budget_per_cluster / pop)


class StreamSampler:
    """Stateful online sampler over an ordered point stream.

    The population estimate for a point's cluster is the trailing count
    over the previous `window_months` complete calendar months of the
    stream itself; before any window data exists the training populations
    stand in. A single consumer owns the stream state; decisions are
    deterministic given the seed and the stream order.
    """

    def __init__(
        self,
        model: ClusterModel,
        budget_per_cluster: float,
        seed: int,
        *,
        window_months: int = 1,
    ):
        self.model = model
        self.budget_per_cluster = budget_per_cluster
        self.window_months = window_months
        self._rng = np.random.default_rng(seed)
        self._counts: dict[MonthKey, np.ndarray] = {}
        self.skipped = 0

    def swap_model(self, model: ClusterModel) -> None:
        """Hot-swap after a retrain. Trailing counts are keyed to the old
        cluster geometry, so they reset and repopulate from the stream."""
        self.model = model
        self._counts = {}

    def _window_population(self, month: MonthKey) -> np.ndarray:
        window = np.zeros(self.model.k)
        cursor = month.prev()
        seen_any = False
        for _ in range(self.window_months):
            if cursor in self._counts:
                window += self._counts[cursor]
                seen_any = True
            cursor = cursor.prev()
        if not seen_any:
            return np.asarray(self.model.populations, dtype=float)
        return window

    def decide(self, point: TelemetryPoint) -> SamplingDecision | None:
        """Decision for one point; None when the workload cannot be
        assigned (counted in `skipped`)."""
        try:
            cluster = assign(self.model, point.workload)
        except InvalidDimension:
            self.skipped += 1
            return None
        month = point.month()
        window = self._window_population(month)
        pop = float(window[cluster])
        probability = acceptance_probability(
            self.model, cluster, self.budget_per_cluster, window
        )
        draw = float(self._rng.random())
        decision = SamplingDecision(
            point_id=point.point_id,
            cluster_index=cluster,
            acceptance_probability=probability,
            accepted=draw < probability,
            rng_draw=draw,
            starved=pop == 0.0,
            month=month,
        )
        if month not in self._counts:
            self._counts[month] = np.zeros(self.model.k)
        self._counts[month][cluster] += 1
        return decision


def sample_stream(
    model: ClusterModel,
    points: Iterable[TelemetryPoint],
    budget_per_cluster: float,
    seed: int,
    *,
    window_months: int = 1,
) -> Iterator[SamplingDecision]:
    """Run a StreamSampler over an iterable of points; unassignable points
    are skipped with an audit gap."""
    sampler = StreamSampler(
        model, budget_per_cluster, seed, window_months=window_months
    )
    for point in points:
        decision = sampler.decide(point)
        if decision is not None:
            yield decision


def entropy_from_counts(counts: Sequence[float] | np.ndarray, base: float = 2.0) -> float:
    """Shannon entropy of the count distribution; zero-count terms
    contribute nothing. Base 2 by default (bits)."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    if base == 2.0:
        logs = np.log2(p)
    else:
        logs = np.log(p) / np.log(base)
    # + 0.0 normalizes the IEEE negative zero a single-cluster month yields
    return float(-(p * logs).sum() + 0.0)


def entropy_report(
    month: MonthKey,
    labels: Iterable,
    store: TelemetryStore,
    model: ClusterModel,
    previous: EntropyReport | None = None,
    *,
    trigger_drop: float = 0.25,
    base: float = 2.0,
) -> EntropyReport:
    """Entropy of the month's labeled points over workload clusters, with
    the month-over-month retrain trigger.

    `labels` may hold point ids or any objects with a point_id attribute.
    A month with no labels reports entropy 0 with NO_LABELS status and
    never triggers a retrain.
    """
    counts = np.zeros(model.k)
    for label in labels:
        point_id = getattr(label, "point_id", label)
        point = store.get(point_id)
        counts[assign(model, point.workload)] += 1
    if counts.sum() == 0:
        return EntropyReport(
            month=month,
            cluster_counts=counts,
            entropy_bits=0.0,
            previous_entropy_bits=(
                previous.entropy_bits if previous is not None else None
            ),
            retrain_triggered=False,
            status=EntropyStatus.NO_LABELS,
        )
    entropy = entropy_from_counts(counts, base=base)
    previous_bits = previous.entropy_bits if previous is not None else None
    triggered = previous_bits is not None and (previous_bits - entropy) >= trigger_drop
    return EntropyReport(
        month=month,
        cluster_counts=counts,
        entropy_bits=entropy,
        previous_entropy_bits=previous_bits,
        retrain_triggered=triggered,
        status=EntropyStatus.OK,
    )
