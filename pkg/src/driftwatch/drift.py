"""Monthly distribution-drift statistics over PCA-reduced telemetry.

Workload drift compares a month against its predecessor: one PCA is
fitted on the union of the two months (separate bases would make the two
reduced distributions incomparable), both months are projected, and the
KL-divergence KL(previous || current) is the test statistic. A month
exceeds when its statistic passes mean + 2 std of the trailing history.

System-performance drift first stratifies both months by workload
cluster, selecting an equal number of perf vectors per cluster and month,
so a workload-mix change cannot masquerade as a perf change. KL is
asymmetric; nothing here assumes otherwise.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .datamodel import FeatureKind, MonthKey, TelemetryStore
from .dimreduce import fit_pca, transform
from .errors import (
    DegenerateDistribution,
    EmptyPeriod,
    InsufficientData,
    InsufficientStratifiedSample,
)
from .sampling import ClusterModel, assign_many

__all__ = [
    "KlMethod",
    "KlEstimate",
    "DriftKind",
    "DriftAction",
    "ReviewStatus",
    "DriftReport",
    "kl_gaussian",
    "kl_histogram",
    "reduced_kl",
    "compute_threshold",
    "workload_drift",
    "sysperf_drift",
    "render_kl_series_svg",
    "write_kl_series_csv",
]

_RIDGE_SCALE = 1e-9
_NEGATIVE_NOISE = 1e-9
_MIN_HISTORY = 3


class KlMethod(Enum):
    GAUSSIAN = "gaussian_closed_form"
    HISTOGRAM = "histogram"


class DriftKind(Enum):
    WORKLOAD = "workload"
    SYSPERF = "sysperf"


class DriftAction(Enum):
    NONE = "none"
    RECOMPUTE_CLUSTERS = "recompute_clusters"
    FLAG_FOR_REVIEW = "flag_for_review"


class ReviewStatus(Enum):
    """Human classification of a sysperf drift; never inferred."""

    UNREVIEWED = "unreviewed"
    EXPECTED = "expected"
    UNEXPECTED = "unexpected"


@dataclass(frozen=True)
class KlEstimate:
    value: float
    method: KlMethod
    sample_sizes: tuple[int, int]

    def to_json_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method.value,
            "sample_sizes": list(self.sample_sizes),
        }


@dataclass(frozen=True)
class DriftReport:
    """Per-month drift statistic, trailing history, threshold and action."""

    kind: DriftKind
    month: MonthKey
    kl: KlEstimate | None
    history: tuple[float, ...]
    threshold: float | None
    exceeded: bool
    action: DriftAction
    direction: str = "prev||curr"
    excluded_clusters: tuple[int, ...] = ()
    selected_per_cell: int | None = None
    degenerate: bool = False
    review: ReviewStatus = ReviewStatus.UNREVIEWED

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "month": str(self.month),
            "kl": self.kl.to_json_dict() if self.kl is not None else None,
            "history": list(self.history),
            "threshold": self.threshold,
            "exceeded": self.exceeded,
            "action": self.action.value,
            "direction": self.direction,
            "excluded_clusters": list(self.excluded_clusters),
            "selected_per_cell": self.selected_per_cell,
            "degenerate": self.degenerate,
            "review": self.review.value,
        }


def _as_samples(X, name: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise InsufficientData(f"{name} must be a 2-D sample matrix")
    return X


def _moments(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (X.shape[0] - 1)
    d = X.shape[1]
    cov = cov + (_RIDGE_SCALE * np.trace(cov) / d) * np.eye(d)
    return mean, cov


def _clamp(value: float) -> float:
    if value < 0.0:
        if value > -_NEGATIVE_NOISE:
            return 0.0
        raise DegenerateDistribution(f"divergence {value} below numerical noise floor")
    return float(value)


def kl_gaussian(A, B) -> KlEstimate:
    """Closed-form KL(N_A || N_B) between Gaussians fitted to each sample.

    Sample covariances get a ridge of 1e-9 * trace / d before inversion;
    a covariance still singular after that (all points identical, or
    perfectly collinear beyond repair) raises DegenerateDistribution.
    """
    A = _as_samples(A, "A")
    B = _as_samples(B, "B")
    if A.shape[1] != B.shape[1]:
        raise InsufficientData("A and B must share dimensionality")
    n, m = A.shape[0], B.shape[0]
    if n < 3 or m < 3:
        raise InsufficientData(f"need at least 3 samples per side, got {n} and {m}")
    d = A.shape[1]
    mu_a, cov_a = _moments(A)
    mu_b, cov_b = _moments(B)
    try:
        np.linalg.cholesky(cov_a)
        np.linalg.cholesky(cov_b)
    except np.linalg.LinAlgError:
        raise DegenerateDistribution("singular covariance after regularization") from None
    sign_a, logdet_a = np.linalg.slogdet(cov_a)
    sign_b, logdet_b = np.linalg.slogdet(cov_b)
    if sign_a <= 0 or sign_b <= 0:
        raise DegenerateDistribution("non-positive covariance determinant")
    trace_term = float(np.trace(np.linalg.solve(cov_b, cov_a)))
    diff = mu_b - mu_a
    maha = float(diff @ np.linalg.solve(cov_b, diff))
    value = 0.5 * (trace_term + maha - d + (logdet_b - logdet_a))
    return KlEstimate(_clamp(value), KlMethod.GAUSSIAN, (n, m))


def kl_histogram(A, B, bins_per_axis: int = 10, alpha: float = 0.5) -> KlEstimate:
    """KL over shared-grid histograms with add-alpha smoothing.

    The grid spans the union bounding box, so both samples land on the
    same cells; the alpha pseudo-count per cell keeps support mismatches
    finite. A zero-width bounding box axis raises DegenerateDistribution.
    """
    A = _as_samples(A, "A")
    B = _as_samples(B, "B")
    if A.shape[1] != B.shape[1]:
        raise InsufficientData("A and B must share dimensionality")
    if bins_per_axis < 1:
        raise InsufficientData(f"bins_per_axis must be >= 1, got {bins_per_axis}")
    n, m = A.shape[0], B.shape[0]
    if n < bins_per_axis or m < bins_per_axis:
        raise InsufficientData("need at least bins_per_axis samples per side")
    lo = np.minimum(A.min(axis=0), B.min(axis=0))
    hi = np.maximum(A.max(axis=0), B.max(axis=0))
    if np.any(hi <= lo):
        raise DegenerateDistribution("union bounding box has a zero-width axis")
    edges = [np.linspace(lo[j], hi[j], bins_per_axis + 1) for j in range(A.shape[1])]
    counts_a, _ = np.histogramdd(A, bins=edges)
    counts_b, _ = np.histogramdd(B, bins=edges)
    cells = counts_a.size
    p = (counts_a.ravel() + alpha) / (n + alpha * cells)
    q = (counts_b.ravel() + alpha) / (m + alpha * cells)
    value = float(np.sum(p * np.log(p / q)))
    return KlEstimate(_clamp(value), KlMethod.HISTOGRAM, (n, m))


def reduced_kl(
    A_raw,
    B_raw,
    *,
    method: KlMethod = KlMethod.GAUSSIAN,
    bins_per_axis: int = 10,
) -> KlEstimate:
    """Fit one PCA on the union of both raw sets, project each, then
    estimate KL(A || B) in the shared reduced space."""
    A_raw = _as_samples(A_raw, "A")
    B_raw = _as_samples(B_raw, "B")
    pca = fit_pca(np.vstack([A_raw, B_raw]), k=min(2, A_raw.shape[1]))
    a = transform(pca, A_raw)
    b = transform(pca, B_raw)
    if method is KlMethod.GAUSSIAN:
        return kl_gaussian(a, b)
    return kl_histogram(a, b, bins_per_axis=bins_per_axis)


def compute_threshold(history) -> float | None:
    """mean + 2 std (population) of the trailing history; undefined until
    at least 3 entries exist."""
    values = np.asarray(list(history), dtype=float)
    if len(values) < _MIN_HISTORY:
        return None
    return float(values.mean() + 2.0 * values.std(ddof=0))


def _finish_report(
    kind: DriftKind,
    month: MonthKey,
    kl: KlEstimate,
    history,
    direction: str,
    excluded: tuple[int, ...] = (),
    selected_per_cell: int | None = None,
) -> DriftReport:
    history = tuple(float(v) for v in history)
    threshold = compute_threshold(history)
    exceeded = threshold is not None and kl.value > threshold
    if not exceeded:
        action = DriftAction.NONE
    elif kind is DriftKind.WORKLOAD:
        action = DriftAction.RECOMPUTE_CLUSTERS
    else:
        # sysperf exceedances go to humans; they never retrain anything
        action = DriftAction.FLAG_FOR_REVIEW
    return DriftReport(
        kind=kind,
        month=month,
        kl=kl,
        history=history,
        threshold=threshold,
        exceeded=exceeded,
        action=action,
        direction=direction,
        excluded_clusters=excluded,
        selected_per_cell=selected_per_cell,
    )


def _degenerate_report(
    kind: DriftKind, month: MonthKey, history, direction: str
) -> DriftReport:
    return DriftReport(
        kind=kind,
        month=month,
        kl=None,
        history=tuple(float(v) for v in history),
        threshold=None,
        exceeded=False,
        action=DriftAction.FLAG_FOR_REVIEW,
        direction=direction,
        degenerate=True,
    )


def _ordered(direction: str, prev: np.ndarray, curr: np.ndarray):
    if direction == "prev||curr":
        return prev, curr
    if direction == "curr||prev":
        return curr, prev
    raise ValueError(f"unknown KL direction {direction!r}")


def workload_drift(
    store: TelemetryStore,
    month: MonthKey,
    history,
    *,
    method: KlMethod = KlMethod.GAUSSIAN,
    bins_per_axis: int = 10,
    direction: str = "prev||curr",
) -> DriftReport:
    """Workload drift of `month` against its predecessor.

    Raises EmptyPeriod when either month has no points. A degenerate
    distribution yields a FlagForReview report without a threshold
    comparison instead of an exception.
    """
    prev = store.month_matrix(month.prev(), FeatureKind.WORKLOAD)
    curr = store.month_matrix(month, FeatureKind.WORKLOAD)
    first, second = _ordered(direction, prev, curr)
    try:
        kl = reduced_kl(first, second, method=method, bins_per_axis=bins_per_axis)
    except DegenerateDistribution:
        return _degenerate_report(DriftKind.WORKLOAD, month, history, direction)
    return _finish_report(DriftKind.WORKLOAD, month, kl, history, direction)


def sysperf_drift(
    store: TelemetryStore,
    month: MonthKey,
    model: ClusterModel,
    history,
    seed: int,
    *,
    method: KlMethod = KlMethod.GAUSSIAN,
    bins_per_axis: int = 10,
    direction: str = "prev||curr",
) -> DriftReport:
    """Workload-stratified system-performance drift of `month` against its
    predecessor.

    Both months are partitioned by workload cluster; clusters empty in
    either month are excluded (and reported); from every remaining
    (cluster, month) cell exactly m* = min cell count perf vectors are
    drawn without replacement, seeded. The two selections then run through
    the same joint-PCA + KL pipeline as workload drift.
    """
    prev_points = store.points_in_month(month.prev())
    curr_points = store.points_in_month(month)
    W_prev = np.array([p.workload for p in prev_points], dtype=float)
    W_curr = np.array([p.workload for p in curr_points], dtype=float)
    P_prev = np.array([p.perf for p in prev_points], dtype=float)
    P_curr = np.array([p.perf for p in curr_points], dtype=float)
    c_prev = assign_many(model, W_prev)
    c_curr = assign_many(model, W_curr)
    count_prev = np.bincount(c_prev, minlength=model.k)
    count_curr = np.bincount(c_curr, minlength=model.k)
    included = [c for c in range(model.k) if count_prev[c] > 0 and count_curr[c] > 0]
    excluded = tuple(c for c in range(model.k) if c not in included)
    if not included:
        raise EmptyPeriod(f"no workload cluster populated in both months around {month}")
    m_star = int(min(min(count_prev[c], count_curr[c]) for c in included))
    if m_star < 3:
        raise InsufficientStratifiedSample(
            f"min stratified cell count {m_star} < 3 for {month}"
        )
    rng = np.random.default_rng(seed)
    sel_prev, sel_curr = [], []
    for c in included:
        idx = np.flatnonzero(c_prev == c)
        sel_prev.append(P_prev[rng.choice(idx, size=m_star, replace=False)])
        idx = np.flatnonzero(c_curr == c)
        sel_curr.append(P_curr[rng.choice(idx, size=m_star, replace=False)])
    S_prev = np.vstack(sel_prev)
    S_curr = np.vstack(sel_curr)
    first, second = _ordered(direction, S_prev, S_curr)
    try:
        kl = reduced_kl(first, second, method=method, bins_per_axis=bins_per_axis)
    except DegenerateDistribution:
        return _degenerate_report(DriftKind.SYSPERF, month, history, direction)
    return _finish_report(
        DriftKind.SYSPERF, month, kl, history, direction, excluded, m_star
    )


def write_kl_series_csv(path, months, values, threshold: float | None = None) -> None:
    """month,kl[,threshold] rows suitable for replotting the series."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["month", "kl"] + (["threshold"] if threshold is not None else [])
        writer.writerow(header)
        for mk, v in zip(months, values):
            row = [str(mk), f"{v:.6f}"]
            if threshold is not None:
                row.append(f"{threshold:.6f}")
            writer.writerow(row)


def render_kl_series_svg(
    months,
    values,
    threshold: float | None = None,
    *,
    width: int = 640,
    height: int = 240,
    title: str = "monthly KL divergence",
) -> str:
    """Minimal self-contained SVG line chart of the monthly KL series."""
    months = [str(m) for m in months]
    values = [float(v) for v in values]
    if not values:
        raise InsufficientData("nothing to render")
    left, right, top, bottom = 50, 15, 25, 35
    plot_w = width - left - right
    plot_h = height - top - bottom
    vmax = max(values + ([threshold] if threshold is not None else []))
    vmax = vmax * 1.1 if vmax > 0 else 1.0
    xs = (
        [left + plot_w / 2]
        if len(values) == 1
        else [left + plot_w * i / (len(values) - 1) for i in range(len(values))]
    )
    ys = [top + plot_h * (1 - v / vmax) for v in values]
    out = io.StringIO()
    out.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
    )
    out.write(f'<text x="{left}" y="15" font-size="12">{title}</text>\n')
    out.write(
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>\n'
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" '
        f'stroke="black"/>\n'
    )
    out.write(f'<text x="5" y="{top + 8}" font-size="10">{vmax:.2f}</text>\n')
    out.write(f'<text x="5" y="{top + plot_h}" font-size="10">0.00</text>\n')
    if threshold is not None:
        ty = top + plot_h * (1 - threshold / vmax)
        out.write(
            f'<line x1="{left}" y1="{ty:.2f}" x2="{left + plot_w}" y2="{ty:.2f}" '
            f'stroke="red" stroke-dasharray="4 3"/>\n'
            f'<text x="{left + plot_w - 80}" y="{ty - 4:.2f}" font-size="10" '
            f'fill="red">threshold {threshold:.3f}</text>\n'
        )
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    out.write(f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>\n')
    for x, y in zip(xs, ys):
        out.write(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="steelblue"/>\n')
    step = max(1, len(months) // 8)
    for i in range(0, len(months), step):
        out.write(
            f'<text x="{xs[i]:.2f}" y="{height - 8}" font-size="9" '
            f'text-anchor="middle">{months[i]}</text>\n'
        )
    out.write("</svg>\n")
    return out.getvalue()
