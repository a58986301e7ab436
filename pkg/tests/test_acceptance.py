"""Acceptance gate: one test per release criterion, each printing a
PASS/FAIL line (run with `pytest tests/test_acceptance.py -s` to watch
them stream)."""

import functools
import sys
import time

import numpy as np
import pytest
from scipy import stats as scipy_stats

import driftwatch
from driftwatch.datamodel import (
    FeatureKind,
    LabelStore,
    MonthKey,
    TelemetryStore,
    Verdict,
)
from driftwatch.dimreduce import fit_pca
from driftwatch.drift import (
    DriftAction,
    compute_threshold,
    kl_gaussian,
    reduced_kl,
    sysperf_drift,
    workload_drift,
)
from driftwatch.evaluation import bootstrap_f1, f1
from driftwatch.labelflow import LabelingEngine, Reaction
from driftwatch.sampling import (
    StreamSampler,
    acceptance_probability,
    entropy_report,
    sample_stream,
    train_clusters,
)

from helpers import (
    correlated_workloads,
    drift_series_store,
    four_blob_workloads,
    make_point,
    mc_kl_oracle,
    mix_shift_store,
    month_ts,
    random_gaussian_pair,
    store_with_months,
)

V = {True: Verdict.ABNORMAL, False: Verdict.NORMAL}


def criterion(name):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"ACCEPTANCE {name}: FAIL", flush=True)
                raise
            print(f"ACCEPTANCE {name}: PASS", flush=True)

        return wrapper

    return deco


@criterion("pca-oracle-equivalence")
def test_01_pca_oracle_equivalence():
    started = time.monotonic()
    for seed in range(50):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(10, 201))
        d = int(rng.integers(2, 9))
        X = rng.normal(size=(n, d)) @ rng.normal(size=(d, d))
        k = int(rng.integers(1, d + 1))
        model = fit_pca(X, k)
        # oracle: LAPACK eigendecomposition of the standardized covariance
        mean, std = X.mean(axis=0), X.std(axis=0, ddof=1)
        scale = np.where(std == 0.0, 1.0, std)
        Z = (X - mean) / scale
        w, Vecs = np.linalg.eigh(Z.T @ Z / (n - 1))
        order = np.argsort(w)[::-1]
        w, Vecs = w[order], Vecs[:, order]
        assert np.allclose(model.explained_variance, w[:k], rtol=1e-6, atol=1e-9)
        for i in range(k):
            distinct = (i == 0 or w[i - 1] - w[i] > 1e-8) and (
                i + 1 >= d or w[i] - w[i + 1] > 1e-8
            )
            if distinct:
                cos = abs(float(model.components[i] @ Vecs[:, i]))
                assert np.arccos(min(1.0, cos)) < 1e-4
    elapsed = time.monotonic() - started
    assert elapsed < 10.0, f"PCA oracle sweep took {elapsed:.1f}s"


def _entropy_world():
    rng = np.random.default_rng(1)
    X, _ = four_blob_workloads(rng, (400, 400, 400, 400))
    store = store_with_months(MonthKey(2023, 1), [(X, np.zeros((len(X), 1)))])
    model = train_clusters(X, 4, seed=1)
    from driftwatch.sampling import assign_many

    assigned = assign_many(model, X)
    points = store.points()
    by_cluster = {
        c: [p.point_id for p, a in zip(points, assigned) if a == c] for c in range(4)
    }
    return store, model, by_cluster


@criterion("entropy-analytic-suite")
def test_02_entropy_analytic_suite():
    store, model, by_cluster = _entropy_world()
    month = MonthKey(2023, 1)

    def report_for(counts, previous=None):
        labels = []
        for c, count in enumerate(counts):
            labels.extend(by_cluster[c][:count])
        return entropy_report(month, labels, store, model, previous)

    uniform = report_for((25, 25, 25, 25))
    assert abs(uniform.entropy_bits - 2.0) <= 1e-12
    dyadic = report_for((8, 4, 2, 2))
    assert abs(dyadic.entropy_bits - 1.75) <= 1e-12
    single = report_for((40, 0, 0, 0))
    assert single.entropy_bits == 0.0
    # trigger fires iff the month-over-month drop reaches 0.25:
    # 2.0 -> 1.75 is exactly 0.25 (fires); 2.0 -> ~1.954 is 0.046 (holds)
    fired = report_for((8, 4, 2, 2), previous=uniform)
    assert fired.retrain_triggered is True
    held = report_for((5, 5, 3, 3), previous=uniform)
    assert held.entropy_bits > 1.9
    assert held.retrain_triggered is False
    # strictly monotone in the drop: just beyond the trigger also fires
    deeper = report_for((10, 4, 2, 2), previous=uniform)
    assert deeper.entropy_bits < 1.75
    assert deeper.retrain_triggered is True


@criterion("diversity-ordering")
def test_03_diversity_ordering():
    store, model, _ = _entropy_world()
    month = MonthKey(2023, 1)
    rng = np.random.default_rng(3)
    extra = TelemetryStore()
    serial = 0

    def add(W):
        nonlocal serial
        ids = []
        for w in W:
            pid = f"d{serial:05d}"
            extra.append(make_point(pid, month_ts(month, 1.0 + serial), w, (0.0,)))
            ids.append(pid)
            serial += 1
        return ids

    concentrated = add(np.array([0.0, 0.0]) + rng.normal(scale=0.3, size=(200, 2)))
    t = rng.uniform(0.0, 10.0, size=200)
    line_like = add(np.column_stack([t, t]) + rng.normal(scale=1.0, size=(200, 2)))
    cluster_sampled = add(
        np.vstack(
            [
                c + rng.normal(scale=0.5, size=(50, 2))
                for c in ([0, 0], [10, 0], [0, 10], [10, 10])
            ]
        )
    )
    h_c = entropy_report(month, concentrated, extra, model, None).entropy_bits
    h_l = entropy_report(month, line_like, extra, model, None).entropy_bits
    h_s = entropy_report(month, cluster_sampled, extra, model, None).entropy_bits
    # mirrors the reported 0.41 < 1.39 < 1.85 ordering (values not required)
    assert h_c < h_l < h_s


@criterion("kl-correctness")
def test_04_kl_correctness():
    started = time.monotonic()
    same = np.random.default_rng(0).normal(size=(1000, 2))
    assert kl_gaussian(same, same).value <= 1e-9
    one_d_a = np.array([[-1.0], [0.0], [1.0]])
    one_d_b = np.array([[0.0], [1.0], [2.0]])
    assert abs(kl_gaussian(one_d_a, one_d_b).value - 0.5) <= 1e-9
    worst = 0.0
    for seed in range(20):
        A, B = random_gaussian_pair(seed)
        est = kl_gaussian(A, B).value
        oracle = mc_kl_oracle(A, B, n=100_000, seed=seed + 500)
        worst = max(worst, abs(est - oracle))
    assert worst < 0.05, f"worst |closed-form - MC| = {worst:.4f}"
    elapsed = time.monotonic() - started
    assert elapsed < 30.0, f"KL sweep took {elapsed:.1f}s"


@criterion("sampler-equalization")
def test_05_sampler_equalization():
    mix = (0.70, 0.20, 0.07, 0.03)
    for run in range(20):
        rng = np.random.default_rng(1000 + run)
        Xtrain, _ = four_blob_workloads(rng, rng.multinomial(4000, mix))
        model = train_clusters(Xtrain, 4, seed=run)
        m1, m2 = MonthKey(2023, 1), MonthKey(2023, 2)
        points = []
        for mi, month in enumerate((m1, m2)):
            W, _ = four_blob_workloads(rng, rng.multinomial(10000, mix))
            for i in range(len(W)):
                points.append(
                    make_point(f"m{mi}-{i}", month_ts(month, 60.0 + i), W[i], (0.0,))
                )
        accepted = np.zeros(4, dtype=int)
        for d in sample_stream(model, points, 50.0, seed=run):
            if d.month == m2 and d.accepted:
                accepted[d.cluster_index] += 1
        _, p = scipy_stats.chisquare(accepted)
        assert p > 0.01, f"run {run}: counts {accepted.tolist()}, p={p:.4f}"
    # the algebraic expected-count identity, exact in floating point for
    # power-of-two population/budget ratios
    _, _m = four_blob_workloads(np.random.default_rng(0), (4, 4, 4, 4))
    model = train_clusters(_, 4, seed=0)
    budget = 50.0
    pops = [800.0, 1600.0, 3200.0, 100.0]
    for c, pop in enumerate(pops):
        assert pop * acceptance_probability(model, c, budget, pops) == budget


@criterion("drift-end-to-end")
def test_06_drift_end_to_end():
    store, months = drift_series_store(seed=7)
    shift_idx, regress_idx = 7, 11
    Xtrain = np.vstack([store.month_matrix(m, FeatureKind.WORKLOAD) for m in months[:3]])
    model = train_clusters(Xtrain, 4, seed=0)
    w_hist, s_hist = [], []
    w_exceeded, s_exceeded = [], []
    for i in range(1, 15):
        wr = workload_drift(store, months[i], w_hist)
        sr = sysperf_drift(store, months[i], model, s_hist, seed=5)
        if wr.exceeded:
            w_exceeded.append(i)
            assert wr.action is DriftAction.RECOMPUTE_CLUSTERS
        if sr.exceeded:
            s_exceeded.append(i)
            assert sr.action is DriftAction.FLAG_FOR_REVIEW
        # a sysperf drift never triggers retraining
        assert sr.action is not DriftAction.RECOMPUTE_CLUSTERS
        w_hist.append(wr.kl.value)
        s_hist.append(sr.kl.value)
    assert w_exceeded == [shift_idx], f"workload exceedances {w_exceeded}"
    assert s_exceeded == [regress_idx], f"sysperf exceedances {s_exceeded}"

    # stratified sysperf KL on a workload-mix-only change sits strictly
    # below the unstratified KL on the same data
    mix_store = mix_shift_store()
    W1 = mix_store.month_matrix(MonthKey(2023, 1), FeatureKind.WORKLOAD)
    W2 = mix_store.month_matrix(MonthKey(2023, 2), FeatureKind.WORKLOAD)
    mix_model = train_clusters(np.vstack([W1, W2]), 4, seed=0)
    P1 = mix_store.month_matrix(MonthKey(2023, 1), FeatureKind.PERF)
    P2 = mix_store.month_matrix(MonthKey(2023, 2), FeatureKind.PERF)
    unstratified = reduced_kl(P1, P2).value
    stratified = sysperf_drift(mix_store, MonthKey(2023, 2), mix_model, [], seed=3).kl.value
    assert stratified < unstratified
    assert stratified < 0.1 < 0.3 < unstratified


@criterion("threshold-arithmetic")
def test_07_threshold_arithmetic():
    # mean 0.26, population std 0.12 -> mean + 2 std = 0.50
    history = [0.14, 0.38, 0.14, 0.38]
    threshold = compute_threshold(history)
    assert abs(threshold - 0.50) <= 1e-12


def _voting_engine():
    telemetry = TelemetryStore()
    labels = LabelStore()
    engine = LabelingEngine(telemetry, labels, quorum=2, window_seconds=3600.0)
    t0 = month_ts(MonthKey(2023, 5), 60.0)
    for i in range(4):
        pid = f"p{i}"
        telemetry.append(make_point(pid, t0, (1.0, 2.0), (3.0,)))
        engine.create_card(
            telemetry.get(pid),
            driftwatch.SamplingDecision(
                point_id=pid,
                cluster_index=0,
                acceptance_probability=1.0,
                accepted=True,
                rng_draw=0.0,
            ),
        )
    return engine, t0


@criterion("vote-aggregation")
def test_08_vote_aggregation():
    engine, t0 = _voting_engine()
    engine.ingest_reaction("p0", "a", Reaction.THUMB_UP, t0 + 1)
    engine.ingest_reaction("p0", "b", Reaction.THUMB_UP, t0 + 2)
    engine.ingest_reaction("p0", "c", Reaction.THUMB_DOWN, t0 + 3)
    engine.ingest_reaction("p1", "a", Reaction.THUMB_UP, t0 + 4)
    engine.ingest_reaction("p1", "b", Reaction.THUMB_DOWN, t0 + 5)
    # same-annotator re-reaction dedups to one record, latest wins
    engine.ingest_reaction("p2", "a", Reaction.THUMB_UP, t0 + 6)
    engine.ingest_reaction("p2", "a", Reaction.THUMB_DOWN, t0 + 7)
    assert len(engine.labels.records_for_point("p2")) == 1
    assert engine.labels.records_for_point("p2")[0].verdict is Verdict.ABNORMAL
    engine.sweep(t0 + 3600.0 + 1)
    majority = engine.get_card("p0")
    assert majority.status is driftwatch.CardStatus.RESOLVED
    assert majority.final_verdict is Verdict.NORMAL
    tie = engine.get_card("p1")
    assert tie.status is driftwatch.CardStatus.DROPPED_TIE

    # replaying the identical reaction log reproduces identical statuses
    def run():
        e, t = _voting_engine()
        e.ingest_reaction("p0", "a", Reaction.THUMB_UP, t + 1)
        e.ingest_reaction("p0", "b", Reaction.THUMB_UP, t + 2)
        e.ingest_reaction("p0", "c", Reaction.THUMB_DOWN, t + 3)
        e.ingest_reaction("p1", "a", Reaction.THUMB_UP, t + 4)
        e.ingest_reaction("p1", "b", Reaction.THUMB_DOWN, t + 5)
        e.ingest_reaction("p2", "a", Reaction.THUMB_UP, t + 6)
        e.ingest_reaction("p2", "a", Reaction.THUMB_DOWN, t + 7)
        e.sweep(t + 3600.0 + 1)
        return {c.point_id: (c.status, c.final_verdict) for c in e.cards()}

    assert run() == run()


def _bias_generator(rng, n, mix, balanced=False, abnormal_rate=0.2, delta=5.0):
    counts = rng.multinomial(n, mix)
    W, owners = correlated_workloads(rng, counts)
    if balanced:
        abnormal = np.zeros(len(W), dtype=bool)
        for c in range(4):
            idx = np.flatnonzero(owners == c)
            abnormal[idx[: len(idx) // 2]] = True
    else:
        abnormal = rng.random(len(W)) < abnormal_rate
    P = rng.normal(size=(len(W), 4))
    # each cluster's anomaly signature points along its own perf axis
    P[abnormal] += delta * np.eye(4)[owners[abnormal]]
    order = rng.permutation(len(W))
    return W[order], P[order], owners[order], abnormal[order]


@criterion("f1-and-bootstrap")
def test_09_f1_and_bootstrap():
    A, N = Verdict.ABNORMAL, Verdict.NORMAL
    worked = [(A, A)] * 8 + [(A, N)] * 2 + [(N, A)] * 4
    assert abs(f1(worked) - 0.72727272) <= 1e-4
    fixture = [(A, A)] * 80 + [(A, N)] * 60 + [(N, A)] * 60 + [(N, N)] * 300
    a = bootstrap_f1(fixture, 1000, seed=3)
    b = bootstrap_f1(fixture, 1000, seed=3)
    assert a.mean_f1 == b.mean_f1 and np.array_equal(a.histogram, b.histogram)
    assert abs(a.mean_f1 - f1(fixture)) < 0.02

    # pipeline-level substitute for the unpublishable model improvement:
    # a nearest-centroid classifier trained on 600 single-cluster labels
    # vs 600 cluster-sampled labels of equal cost, same generator
    mix = (0.70, 0.20, 0.07, 0.03)
    rng = np.random.default_rng(123)
    Wtrain, _, _, _ = _bias_generator(rng, 4000, mix)
    model = train_clusters(Wtrain, 4, seed=1)
    Ws, Ps, owners, abnormal = _bias_generator(rng, 20000, mix)
    month = MonthKey(2023, 1)
    points = [
        make_point(f"s{i}", month_ts(month, i + 1.0), Ws[i], Ps[i])
        for i in range(len(Ws))
    ]
    accepted = np.array(
        [
            int(d.point_id[1:])
            for d in sample_stream(model, points, 160.0, seed=2)
            if d.accepted
        ]
    )
    biased_idx = np.flatnonzero(owners == 0)[:600]
    sampled_idx = accepted[:600]
    assert len(sampled_idx) == 600

    def nearest_centroid(idx):
        X, y = Ps[idx], abnormal[idx]
        return X[~y].mean(axis=0), X[y].mean(axis=0)

    def predict(centroids, X):
        cn, ca = centroids
        return ((X - ca) ** 2).sum(axis=1) < ((X - cn) ** 2).sum(axis=1)

    _, Pt, _, truth = _bias_generator(rng, 1600, (0.25,) * 4, balanced=True)
    means = {}
    for name, idx in (("biased", biased_idx), ("sampled", sampled_idx)):
        predicted = predict(nearest_centroid(idx), Pt)
        pairs = [(V[p], V[t]) for p, t in zip(predicted, truth)]
        means[name] = bootstrap_f1(pairs, 1000, seed=9).mean_f1
    improvement = means["sampled"] - means["biased"]
    assert improvement >= 0.05, f"improvement {improvement:.3f} < 0.05"


@criterion("standalone-primary")
def test_10_standalone_primary():
    # the entire suite above touches only the Python package: nothing in
    # the driftwatch namespace is (or imports) a labeling-console module,
    # and no top-level frontend module entered the process
    assert "frontend" not in sys.modules
    for mod in list(sys.modules):
        if mod.startswith("driftwatch"):
            assert "console" not in mod and "frontend" not in mod
    assert driftwatch.__version__
