"""
Scoring predictions with bootstrapped F1
========================================

Abnormal is the positive class. The bootstrap redraws the evaluation
pairs with replacement to show the spread of the F1 estimate, and the
same machinery demonstrates why label bias hurts: a classifier trained
on single-cluster labels misses every other cluster's anomaly signature.
"""

import numpy as np

from driftwatch import bootstrap_f1, f1
from driftwatch.datamodel import Verdict

A, N = Verdict.ABNORMAL, Verdict.NORMAL

# a worked confusion: tp=8, fp=2, fn=4 (precision 0.8, recall 2/3)
pairs = [(A, A)] * 8 + [(A, N)] * 2 + [(N, A)] * 4
print("point F1:", round(f1(pairs), 4))

fixture = [(A, A)] * 80 + [(A, N)] * 60 + [(N, A)] * 60 + [(N, N)] * 300
summary = bootstrap_f1(fixture, resamples=1000, seed=3)
print(
    f"bootstrap over {summary.resamples} resamples: "
    f"mean {summary.mean_f1:.4f}, std {summary.std_f1:.4f}, "
    f"range [{summary.min_f1:.3f}, {summary.max_f1:.3f}]"
)

# histogram bins are fixed over [0, 1] so runs are comparable
occupied = np.flatnonzero(summary.histogram)
print("occupied histogram bins:", occupied.min(), "..", occupied.max(), "of 50")

# label bias in one picture: per-cluster anomaly signatures, training
# labels from one cluster only vs spread over all four
rng = np.random.default_rng(5)


def labeled_perf(n_per_cluster):
    X, y = [], []
    for c, n in enumerate(n_per_cluster):
        abnormal = np.zeros(n, dtype=bool)
        abnormal[: n // 5] = True
        P = rng.normal(size=(n, 4))
        P[abnormal, c] += 5.0  # cluster c's anomalies move along axis c
        X.append(P)
        y.append(abnormal)
    return np.vstack(X), np.concatenate(y)


def nearest_centroid_f1(train_X, train_y, test_X, test_y):
    cn, ca = train_X[~train_y].mean(axis=0), train_X[train_y].mean(axis=0)
    predicted = ((test_X - ca) ** 2).sum(axis=1) < ((test_X - cn) ** 2).sum(axis=1)
    pairs = [(A if p else N, A if t else N) for p, t in zip(predicted, test_y)]
    return bootstrap_f1(pairs, 500, seed=11).mean_f1

test_X, test_y = labeled_perf((200, 200, 200, 200))
biased_X, biased_y = labeled_perf((600, 0, 0, 0))
spread_X, spread_y = labeled_perf((150, 150, 150, 150))
print("\nbiased training labels   -> mean F1", round(nearest_centroid_f1(biased_X, biased_y, test_X, test_y), 3))
print("balanced training labels -> mean F1", round(nearest_centroid_f1(spread_X, spread_y, test_X, test_y), 3))
