"""
Reducing multivariate telemetry to two dimensions
=================================================

Telemetry rows mix units (request rates, milliseconds, percentages), so
each feature is standardized before the eigendecomposition. The fitted
model is deterministic: same input, bit-identical components.
"""

import numpy as np

from driftwatch import fit_pca, transform

rng = np.random.default_rng(0)

# a synthetic workload table: two independent drivers plus two counters
# that co-move with them, the way real telemetry behaves
u = rng.normal(50.0, 8.0, size=500)      # e.g. requests/s
v = rng.normal(10.0, 2.0, size=500)      # e.g. concurrent clients
X = np.column_stack([
    u,
    v,
    0.6 * u + 0.4 * v + rng.normal(scale=1.0, size=500),   # CPU-ish
    0.8 * u - 0.5 * v + rng.normal(scale=1.0, size=500),   # IO-ish
])

model = fit_pca(X, k=2)
print("explained variance:", np.round(model.explained_variance, 3))
print("share of total:    ", np.round(model.explained_variance_ratio, 3))

# project the table into the 2-D space used for plots and clustering
Z = transform(model, X)
print("reduced shape:", Z.shape)
print("reduced column variances:", np.round(Z.var(axis=0, ddof=1), 3))

# the model serializes to plain JSON for reuse across runs
blob = model.to_json_dict()
print("serialized keys:", sorted(blob))
