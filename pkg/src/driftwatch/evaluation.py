"""F1 scoring against aggregated labels and bootstrapped score
distributions. Abnormal is the positive class."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .datamodel import AggregatedLabel, CardStatus, Verdict
from .errors import EmptyEvaluation

__all__ = [
    "Confusion",
    "BootstrapSummary",
    "confusion_from_pairs",
    "f1",
    "bootstrap_f1",
    "load_predictions",
    "join_predictions",
    "write_histogram_csv",
]

HISTOGRAM_BINS = 50

Pair = tuple[Verdict, Verdict]  # (predicted, actual)


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_json_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def confusion_from_pairs(pairs: Sequence[Pair]) -> Confusion:
    tp = fp = fn = tn = 0
    for predicted, actual in pairs:
        if predicted is Verdict.ABNORMAL and actual is Verdict.ABNORMAL:
            tp += 1
        elif predicted is Verdict.ABNORMAL:
            fp += 1
        elif actual is Verdict.ABNORMAL:
            fn += 1
        else:
            tn += 1
    return Confusion(tp, fp, fn, tn)


def _f1_from_counts(tp: int, fp: int, fn: int) -> float:
    # zero-division convention: no predicted positives, no actual
    # positives, or P + R = 0 all score 0
    if tp + fp == 0 or tp + fn == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def f1(pairs: Sequence[Pair]) -> float:
    """F1 = 2PR / (P + R) with the zero convention; raises
    EmptyEvaluation on empty input."""
    if not pairs:
        raise EmptyEvaluation("no (predicted, actual) pairs")
    c = confusion_from_pairs(pairs)
    return _f1_from_counts(c.tp, c.fp, c.fn)


@dataclass(frozen=True)
class BootstrapSummary:
    resamples: int
    mean_f1: float
    std_f1: float
    min_f1: float
    max_f1: float
    histogram: np.ndarray  # HISTOGRAM_BINS counts over [0, 1]
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "resamples": self.resamples,
            "mean_f1": self.mean_f1,
            "std_f1": self.std_f1,
            "min_f1": self.min_f1,
            "max_f1": self.max_f1,
            "histogram": [int(c) for c in self.histogram],
            "seed": self.seed,
        }


def bootstrap_f1(pairs: Sequence[Pair], resamples: int, seed: int) -> BootstrapSummary:
    """Bootstrap distribution of F1 over resamples-with-replacement.

    Each resample draws len(pairs) pairs using an independent RNG
    substream derived from (seed, resample index), so resamples could be
    computed in parallel without changing the result. Resamples with no
    positives score 0 by the f1 convention and stay in the distribution.
    """
    if not pairs:
        raise EmptyEvaluation("no (predicted, actual) pairs")
    if resamples < 100:
        raise ValueError(f"resamples must be >= 100, got {resamples}")
    n = len(pairs)
    pred_abnormal = np.array([p is Verdict.ABNORMAL for p, _ in pairs], dtype=bool)
    act_abnormal = np.array([a is Verdict.ABNORMAL for _, a in pairs], dtype=bool)
    scores = np.empty(resamples)
    for i in range(resamples):
        rng = np.random.default_rng([seed, i])
        idx = rng.integers(0, n, size=n)
        p = pred_abnormal[idx]
        a = act_abnormal[idx]
        tp = int(np.sum(p & a))
        fp = int(np.sum(p & ~a))
        fn = int(np.sum(~p & a))
        scores[i] = _f1_from_counts(tp, fp, fn)
    histogram, _ = np.histogram(scores, bins=HISTOGRAM_BINS, range=(0.0, 1.0))
    return BootstrapSummary(
        resamples=resamples,
        mean_f1=float(scores.mean()),
        std_f1=float(scores.std(ddof=0)),
        min_f1=float(scores.min()),
        max_f1=float(scores.max()),
        histogram=histogram,
        seed=seed,
    )


def load_predictions(source: str | Path | Iterable[str]) -> dict[str, Verdict]:
    """Predictions JSONL: {"point_id": str, "predicted": "normal"|"abnormal"}."""
    if isinstance(source, (str, Path)):
        lines: Iterable[str] = Path(source).read_text(encoding="utf-8").splitlines()
    else:
        lines = source
    out: dict[str, Verdict] = {}
    for line in lines:
        if not line.strip():
            continue
        obj = json.loads(line)
        out[str(obj["point_id"])] = Verdict(obj["predicted"])
    return out


def join_predictions(
    predictions: dict[str, Verdict], labels: Iterable[AggregatedLabel]
) -> list[Pair]:
    """Match predictions to resolved labels by point_id; dropped ties and
    unlabeled predictions fall out of the evaluation."""
    pairs = []
    for label in labels:
        if label.status is not CardStatus.RESOLVED or label.final_verdict is None:
            continue
        predicted = predictions.get(label.point_id)
        if predicted is None:
            continue
        pairs.append((predicted, label.final_verdict))
    return pairs


def write_histogram_csv(path: str | Path, summary: BootstrapSummary) -> None:
    import csv

    edges = np.linspace(0.0, 1.0, HISTOGRAM_BINS + 1)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_low", "bin_high", "count"])
        for i, count in enumerate(summary.histogram):
            writer.writerow([f"{edges[i]:.3f}", f"{edges[i + 1]:.3f}", int(count)])
