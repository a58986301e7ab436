"""
Monthly drift detection with KL-divergence
==========================================

Each month is compared to its predecessor in a shared 2-D PCA space;
KL(previous || current) is the test statistic, thresholded at
mean + 2 std of the trailing history. Workload drift recomputes the
clusters; system-performance drift is stratified by workload cluster
first and goes to humans, never to automatic retraining.
"""

import numpy as np

from driftwatch import kl_gaussian, kl_histogram, sysperf_drift, train_clusters, workload_drift
from driftwatch.datamodel import FeatureKind, MonthKey, TelemetryPoint, TelemetryStore

# the two estimators agree on mild drifts; the closed form is the default
rng = np.random.default_rng(2)
A = rng.multivariate_normal([0, 0], [[1.0, 0.3], [0.3, 1.0]], size=5000)
B = rng.multivariate_normal([0.4, 0.1], [[1.1, 0.2], [0.2, 0.9]], size=5000)
print("gaussian closed form:", round(kl_gaussian(A, B).value, 4))
print("histogram cross-check:", round(kl_histogram(A, B, 10).value, 4))

# a 10-month synthetic store with a workload level change at month 7
CENTERS = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]])
store = TelemetryStore()
months = [MonthKey(2023, m) for m in range(1, 11)]
serial = 0
for mi, month in enumerate(months):
    counts = rng.multinomial(400, (0.4, 0.3, 0.2, 0.1))
    W = np.vstack([CENTERS[c] + rng.normal(scale=1.0, size=(counts[c], 2)) for c in range(4)])
    if mi >= 7:
        W = W + 2.0  # persistent level change: two within-cluster stds
    P = np.array([20.0, 30.0]) + rng.normal(size=(len(W), 2)) * np.array([4.0, 5.0])
    for w, p in zip(W, P):
        store.append(
            TelemetryPoint(f"p{serial}", month.start_timestamp() + serial % 9000, "sddc-1", tuple(w), tuple(p))
        )
        serial += 1

model = train_clusters(store.month_matrix(months[0], FeatureKind.WORKLOAD), K=4, seed=1)

print(f"\n{'month':>8} {'workload KL':>12} {'threshold':>10}  action")
w_history, s_history = [], []
for month in months[1:]:
    wr = workload_drift(store, month, w_history)
    sr = sysperf_drift(store, month, model, s_history, seed=5)
    thr = f"{wr.threshold:.4f}" if wr.threshold is not None else "   n/a"
    print(f"{month!s:>8} {wr.kl.value:>12.4f} {thr:>10}  {wr.action.value}")
    w_history.append(wr.kl.value)
    s_history.append(sr.kl.value)
