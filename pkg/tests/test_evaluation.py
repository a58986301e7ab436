import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from driftwatch.datamodel import AggregatedLabel, CardStatus, Verdict
from driftwatch.errors import EmptyEvaluation
from driftwatch.evaluation import (
    HISTOGRAM_BINS,
    bootstrap_f1,
    confusion_from_pairs,
    f1,
    join_predictions,
    load_predictions,
    write_histogram_csv,
)

N, A = Verdict.NORMAL, Verdict.ABNORMAL


def pairs_from_confusion(tp=0, fp=0, fn=0, tn=0):
    return (
        [(A, A)] * tp + [(A, N)] * fp + [(N, A)] * fn + [(N, N)] * tn
    )


class TestF1:
    def test_all_correct(self):
        assert f1(pairs_from_confusion(tp=3, tn=5)) == 1.0

    def test_worked_example(self):
        # P = 0.8, R = 2/3 -> F1 = 0.7273
        score = f1(pairs_from_confusion(tp=8, fp=2, fn=4))
        assert score == pytest.approx(0.72727272, abs=1e-4)

    def test_zero_predicted_positives(self):
        assert f1(pairs_from_confusion(fn=4, tn=10)) == 0.0

    def test_zero_actual_positives(self):
        assert f1(pairs_from_confusion(fp=4, tn=10)) == 0.0

    def test_empty_raises(self):
        with pytest.raises(EmptyEvaluation):
            f1([])

    def test_confusion_counts(self):
        c = confusion_from_pairs(pairs_from_confusion(tp=1, fp=2, fn=3, tn=4))
        assert (c.tp, c.fp, c.fn, c.tn) == (1, 2, 3, 4)
        assert c.total == 10

    @given(
        st.lists(
            st.tuples(st.sampled_from([N, A]), st.sampled_from([N, A])),
            min_size=1,
            max_size=50,
        ),
        st.integers(min_value=2, max_value=5),
    )
    def test_duplication_invariance(self, pairs, times):
        assert f1(pairs) == pytest.approx(f1(pairs * times), abs=1e-12)


class TestBootstrap:
    def test_all_correct_degenerate(self):
        summary = bootstrap_f1(pairs_from_confusion(tp=10, tn=10), 200, seed=0)
        assert summary.mean_f1 == 1.0
        assert summary.std_f1 == 0.0

    def test_same_seed_identical(self):
        pairs = pairs_from_confusion(tp=40, fp=10, fn=15, tn=100)
        a = bootstrap_f1(pairs, 300, seed=7)
        b = bootstrap_f1(pairs, 300, seed=7)
        assert a.mean_f1 == b.mean_f1
        assert a.std_f1 == b.std_f1
        assert np.array_equal(a.histogram, b.histogram)

    def test_different_seed_differs(self):
        pairs = pairs_from_confusion(tp=40, fp=10, fn=15, tn=100)
        a = bootstrap_f1(pairs, 300, seed=7)
        b = bootstrap_f1(pairs, 300, seed=8)
        assert a.mean_f1 != b.mean_f1

    def test_mean_tracks_full_sample_f1(self):
        # 500-pair fixture with a mixed confusion
        pairs = pairs_from_confusion(tp=80, fp=60, fn=60, tn=300)
        summary = bootstrap_f1(pairs, 1000, seed=3)
        assert abs(summary.mean_f1 - f1(pairs)) < 0.02
        assert summary.min_f1 <= summary.mean_f1 <= summary.max_f1

    def test_doubling_resamples_stable(self):
        pairs = pairs_from_confusion(tp=50, fp=25, fn=25, tn=150)
        a = bootstrap_f1(pairs, 1000, seed=5)
        b = bootstrap_f1(pairs, 2000, seed=5)
        assert abs(a.mean_f1 - b.mean_f1) < 0.01

    def test_positive_free_resamples_score_zero(self):
        # a single abnormal pair among 120: some resamples miss it
        pairs = pairs_from_confusion(tp=1, tn=119)
        summary = bootstrap_f1(pairs, 500, seed=11)
        assert summary.min_f1 == 0.0
        assert summary.histogram[0] > 0
        assert summary.histogram.sum() == 500

    def test_resample_floor(self):
        with pytest.raises(ValueError):
            bootstrap_f1(pairs_from_confusion(tp=5, tn=5), 99, seed=0)

    def test_empty_raises(self):
        with pytest.raises(EmptyEvaluation):
            bootstrap_f1([], 200, seed=0)

    def test_histogram_csv(self, tmp_path):
        summary = bootstrap_f1(pairs_from_confusion(tp=40, fp=5, fn=5, tn=50), 200, 0)
        path = tmp_path / "hist.csv"
        write_histogram_csv(path, summary)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "bin_low,bin_high,count"
        assert len(lines) == HISTOGRAM_BINS + 1
        assert sum(int(l.split(",")[2]) for l in lines[1:]) == 200


class TestJoin:
    def test_predictions_joined_on_resolved_only(self):
        predictions = {
            "p1": A,
            "p2": N,
            "p3": A,
            "p9": A,
        }
        labels = [
            AggregatedLabel("p1", A, {A: 2, N: 0}, CardStatus.RESOLVED),
            AggregatedLabel("p2", N, {A: 0, N: 2}, CardStatus.RESOLVED),
            AggregatedLabel("p3", None, {A: 1, N: 1}, CardStatus.DROPPED_TIE),
        ]
        pairs = join_predictions(predictions, labels)
        assert pairs == [(A, A), (N, N)]

    def test_load_predictions_jsonl(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        path.write_text(
            json.dumps({"point_id": "p1", "predicted": "abnormal"})
            + "\n"
            + json.dumps({"point_id": "p2", "predicted": "normal"})
            + "\n"
        )
        got = load_predictions(path)
        assert got == {"p1": A, "p2": N}
