"""Shared synthetic-data builders for the test suite."""

from __future__ import annotations

from datetime import datetime, timezone

import numpy as np

from driftwatch.datamodel import MonthKey, TelemetryPoint, TelemetryStore


def month_ts(month: MonthKey, offset_seconds: float = 0.0) -> float:
    base = datetime(month.year, month.month, 1, tzinfo=timezone.utc).timestamp()
    return base + offset_seconds


def make_point(
    pid: str,
    ts: float,
    workload,
    perf,
    entity: str = "host-1",
) -> TelemetryPoint:
    return TelemetryPoint(
        point_id=pid,
        timestamp=ts,
        entity_id=entity,
        workload=tuple(float(v) for v in workload),
        perf=tuple(float(v) for v in perf),
    )


def four_blob_workloads(
    rng: np.random.Generator,
    counts,
    centers=None,
    sigma: float = 0.5,
) -> tuple[np.ndarray, np.ndarray]:
    """Well-separated blob mixture; returns (points, true blob index)."""
    if centers is None:
        centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]])
    centers = np.asarray(centers, dtype=float)
    xs, owners = [], []
    for c, count in enumerate(counts):
        xs.append(centers[c] + rng.normal(scale=sigma, size=(count, centers.shape[1])))
        owners.extend([c] * count)
    return np.vstack(xs), np.array(owners)


def store_with_months(
    month0: MonthKey,
    monthly: list[tuple[np.ndarray, np.ndarray]],
    path=None,
) -> TelemetryStore:
    """Build a store holding one batch of (workload, perf) rows per month,
    spread across the month at one-minute intervals."""
    store = TelemetryStore(path)
    month = month0
    serial = 0
    for W, P in monthly:
        for i in range(len(W)):
            store.append(
                make_point(
                    f"p{serial:07d}",
                    month_ts(month, 60.0 * (i + 1)),
                    W[i],
                    P[i],
                )
            )
            serial += 1
        month = month.next()
    return store


# --- drift-series fixture -------------------------------------------------
#
# Workloads are a 4-cluster mixture with correlated derived counters (the
# way real workload telemetry behaves: rates and utilizations co-move), so
# the 2-D PCA space carries the cluster structure. Perf is independent of
# cluster here; the injected regression shifts two perf features by 3 std.

DRIFT_MIX = (0.4, 0.3, 0.2, 0.1)
DRIFT_CENTERS = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]])
PERF_BASE = np.array([20.0, 30.0, 60.0, 40.0])
PERF_SIGMA = np.array([4.0, 5.0, 8.0, 6.0])


def correlated_workloads(
    rng: np.random.Generator,
    counts,
    centers=DRIFT_CENTERS,
    sigma: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """4-feature workload rows: two blob coordinates plus two correlated
    derived counters. Returns (rows, true blob index)."""
    xs, owners = [], []
    for c, count in enumerate(counts):
        uv = centers[c] + rng.normal(scale=sigma, size=(count, 2))
        u, v = uv[:, 0], uv[:, 1]
        f2 = 0.6 * u + 0.4 * v + rng.normal(scale=1.0, size=count)
        f3 = 0.8 * u - 0.5 * v + rng.normal(scale=1.0, size=count)
        xs.append(np.column_stack([u, v, f2, f3]))
        owners.extend([c] * count)
    return np.vstack(xs), np.array(owners)


def drift_series_store(
    seed: int = 7,
    n_per_month: int = 400,
    n_months: int = 15,
    shift_month: int = 7,
    regress_month: int = 11,
) -> tuple[TelemetryStore, list[MonthKey]]:
    """15-month series: stationary cluster mixture, a persistent workload
    level shift of 2 pooled within-cluster stds starting at `shift_month`,
    and a persistent perf regression of +3 std on the two latency-like
    features starting at `regress_month` (both 0-based month indices)."""
    rng = np.random.default_rng(seed)
    monthly = []
    for m in range(n_months):
        counts = rng.multinomial(n_per_month, DRIFT_MIX)
        W, _ = correlated_workloads(rng, counts)
        if m >= shift_month:
            W = W + 2.0
        P = PERF_BASE + rng.normal(size=(len(W), 4)) * PERF_SIGMA
        if m >= regress_month:
            P = P + np.array([3.0 * PERF_SIGMA[0], 3.0 * PERF_SIGMA[1], 0.0, 0.0])
        order = rng.permutation(len(W))
        monthly.append((W[order], P[order]))
    store = store_with_months(MonthKey(2020, 1), monthly)
    months = [MonthKey(2020, 1)]
    while len(months) < n_months:
        months.append(months[-1].next())
    return store, months


PERF_MEANS_BY_CLUSTER = np.array(
    [
        [0.0, 0.0, 0.0, 0.0],
        [6.0, 0.0, 0.0, 0.0],
        [0.0, 6.0, 0.0, 0.0],
        [6.0, 6.0, 0.0, 0.0],
    ]
)


def mix_shift_store(seed: int = 11, n: int = 800) -> TelemetryStore:
    """Two months where perf depends on the workload cluster and only the
    cluster mix changes; the perf drift seen unstratified is pure
    workload-mix confound."""
    rng = np.random.default_rng(seed)
    months = []
    for mix in ((0.60, 0.20, 0.15, 0.05), (0.05, 0.15, 0.20, 0.60)):
        counts = rng.multinomial(n, mix)
        W, owners = correlated_workloads(rng, counts)
        P = PERF_MEANS_BY_CLUSTER[owners] + rng.normal(scale=1.0, size=(len(W), 4))
        months.append((W, P))
    return store_with_months(MonthKey(2023, 1), months)


def mc_kl_oracle(A, B, n: int = 100_000, seed: int = 0) -> float:
    """Monte Carlo KL between the Gaussians fitted to A and B: draw from
    the fitted A and average the log-density ratio (independent of the
    closed-form path under test)."""
    from scipy.stats import multivariate_normal

    mu_a, cov_a = A.mean(axis=0), np.cov(A, rowvar=False, ddof=1)
    mu_b, cov_b = B.mean(axis=0), np.cov(B, rowvar=False, ddof=1)
    rng = np.random.default_rng(seed)
    xs = rng.multivariate_normal(mu_a, cov_a, size=n)
    return float(
        np.mean(
            multivariate_normal.logpdf(xs, mu_a, cov_a)
            - multivariate_normal.logpdf(xs, mu_b, cov_b)
        )
    )


def rotation2(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def random_gaussian_pair(seed: int, n: int = 5000) -> tuple[np.ndarray, np.ndarray]:
    """Two seeded random 2-D Gaussian samples with rotated anisotropic
    covariances."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(2):
        mu = rng.uniform(-1.0, 1.0, size=2)
        R = rotation2(rng.uniform(0.0, np.pi))
        s = rng.uniform(0.5, 1.5, size=2)
        cov = R @ np.diag(s**2) @ R.T
        out.append(rng.multivariate_normal(mu, cov, size=n))
    return out[0], out[1]
