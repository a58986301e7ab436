"""
Label-diversity entropy and the retrain trigger
===============================================

Shannon entropy of the label distribution over workload clusters measures
how evenly the labeling effort covers the pattern space. The pipeline
retrains the cluster sampler whenever the entropy drops 0.25 bits below
the previous month.
"""

import numpy as np

from driftwatch import entropy_from_counts, entropy_report, train_clusters
from driftwatch.datamodel import MonthKey, TelemetryPoint, TelemetryStore

# entropy over raw counts: uniform coverage maxes out at log2(K)
print("uniform (25, 25, 25, 25):", entropy_from_counts([25, 25, 25, 25]), "bits")
print("skewed  (8, 4, 2, 2):    ", entropy_from_counts([8, 4, 2, 2]), "bits")
print("single cluster:          ", entropy_from_counts([40, 0, 0, 0]), "bits")

# the same measure over actual labeled points, via the cluster model
rng = np.random.default_rng(1)
CENTERS = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]])
rows = np.vstack([c + rng.normal(scale=0.5, size=(300, 2)) for c in CENTERS])

store = TelemetryStore()
month = MonthKey(2023, 4)
for i, w in enumerate(rows):
    store.append(
        TelemetryPoint(f"p{i}", month.start_timestamp() + i, "sddc-1", tuple(w), (0.0,))
    )
model = train_clusters(rows, K=4, seed=1)

# a well-covered month, then a month that collapsed onto one pattern
balanced = [f"p{i}" for i in range(0, 1200, 12)]
collapsed = [f"p{i}" for i in range(100)]

good = entropy_report(month, balanced, store, model)
print("\nbalanced month:", round(good.entropy_bits, 3), "bits")

bad = entropy_report(month.next(), collapsed, store, model, previous=good)
print("collapsed month:", round(bad.entropy_bits, 3), "bits")
print("retrain triggered:", bad.retrain_triggered)
