"""Operator command line: ingest, train-clusters, sample, entropy, drift,
eval and serve.

Exit codes: 0 success (a detected drift is a result, not a failure),
1 internal error, 2 invalid input or config.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import traceback

import numpy as np

from .config import PipelineConfig, load_config
from .datamodel import FeatureKind, MonthKey, TelemetryPoint
from .drift import (
    DriftKind,
    render_kl_series_svg,
    sysperf_drift,
    workload_drift,
    write_kl_series_csv,
)
from .errors import ConfigError, DriftwatchError, EmptyPeriod
from .evaluation import (
    bootstrap_f1,
    f1,
    join_predictions,
    load_predictions,
    write_histogram_csv,
)
from .sampling import entropy_report, sample_stream, train_clusters
from .service import ServiceState, _kl_method, serve

logger = logging.getLogger(__name__)


def _month(text: str) -> MonthKey:
    try:
        return MonthKey.parse(text)
    except (ValueError, TypeError):
        raise argparse.ArgumentTypeError(f"expected YYYY-MM, got {text!r}") from None


def _month_range(text: str) -> list[MonthKey]:
    start_text, _, end_text = text.partition(":")
    start = _month(start_text)
    end = _month(end_text) if end_text else start
    if end < start:
        raise argparse.ArgumentTypeError(f"month range {text!r} runs backwards")
    months = [start]
    while months[-1] < end:
        months.append(months[-1].next())
    return months


def _emit(args, human: str, payload: dict) -> None:
    if args.json:
        print(json.dumps(payload))
    else:
        print(human)


def cmd_ingest(args) -> int:
    config = load_config(args.config)
    state = ServiceState(config)
    totals = {"accepted": 0, "rejected": 0, "reasons": {}}
    for file in args.files:
        if args.labels:
            report = state.labels.ingest_labels(file)
        else:
            report = state.telemetry.ingest_points(file)
        totals["accepted"] += report.accepted
        totals["rejected"] += report.rejected_count
        for reason, count in report.reasons().items():
            totals["reasons"][reason] = totals["reasons"].get(reason, 0) + count
    reasons = ", ".join(f"{r}={c}" for r, c in sorted(totals["reasons"].items()))
    _emit(
        args,
        f"ingested {totals['accepted']} records, rejected {totals['rejected']}"
        + (f" ({reasons})" if reasons else ""),
        totals,
    )
    return 0


def cmd_train_clusters(args) -> int:
    config = load_config(args.config)
    state = ServiceState(config)
    matrices = []
    used = []
    for month in args.months:
        try:
            matrices.append(state.telemetry.month_matrix(month, FeatureKind.WORKLOAD))
            used.append(month)
        except EmptyPeriod:
            continue
    if not matrices:
        raise EmptyPeriod(f"no telemetry in {args.months[0]}..{args.months[-1]}")
    seed = args.seed if args.seed is not None else config.sampling.train_seed
    model = train_clusters(
        np.vstack(matrices),
        config.sampling.k,
        seed,
        training_window=(used[0], used[-1]),
    )
    state.swap_model(model)
    payload = {
        "model_path": str(config.model_path),
        "k": model.k,
        "requested_k": model.requested_k,
        "populations": model.populations.tolist(),
        "training_window": [str(used[0]), str(used[-1])],
    }
    pops = ", ".join(f"c{i}={int(p)}" for i, p in enumerate(model.populations))
    _emit(args, f"trained {model.k} clusters on {used[0]}..{used[-1]}: {pops}", payload)
    return 0


def _read_stream_file(path) -> list[TelemetryPoint]:
    points = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            if "point_id" not in obj:
                continue  # header record
            points.append(TelemetryPoint.from_json_dict(obj))
    return points


def cmd_sample(args) -> int:
    config = load_config(args.config)
    state = ServiceState(config)
    model = state.model
    if model is None:
        raise ConfigError(f"no cluster model at {config.model_path}; run train-clusters")
    if args.input is not None:
        points = _read_stream_file(args.input)
    elif args.month is not None:
        points = state.telemetry.points_in_month(args.month)
    else:
        raise ConfigError("sample needs an input file or --month")
    seed = args.seed if args.seed is not None else config.sampling.sample_seed
    accepted = np.zeros(model.k, dtype=int)
    seen = np.zeros(model.k, dtype=int)
    starved = 0
    for decision in sample_stream(
        model,
        points,
        config.sampling.budget_per_cluster,
        seed,
        window_months=config.sampling.window_months,
    ):
        state.decisions_log.append(decision.to_json_dict())
        seen[decision.cluster_index] += 1
        if decision.accepted:
            accepted[decision.cluster_index] += 1
        if decision.starved:
            starved += 1
    payload = {
        "points": int(seen.sum()),
        "accepted": accepted.tolist(),
        "seen": seen.tolist(),
        "starved_decisions": starved,
        "decisions_path": str(config.decisions_path),
    }
    per = ", ".join(f"c{i}={a}/{s}" for i, (a, s) in enumerate(zip(accepted, seen)))
    _emit(args, f"sampled {int(accepted.sum())}/{int(seen.sum())} points ({per})", payload)
    return 0


def cmd_entropy(args) -> int:
    config = load_config(args.config)
    state = ServiceState(config)
    model = state.model
    if model is None:
        raise ConfigError(f"no cluster model at {config.model_path}; run train-clusters")
    previous_obj = state.latest_entropy_before(args.month)
    previous = None
    if previous_obj is not None and previous_obj["status"] == "ok":
        from .sampling import EntropyReport

        previous = EntropyReport.from_json_dict(previous_obj)
    labels = state.engine.aggregated_labels(args.month)
    report = entropy_report(
        args.month,
        labels,
        state.telemetry,
        model,
        previous,
        trigger_drop=config.sampling.trigger_drop,
        base=config.sampling.entropy_base,
    )
    state.entropy_log.append(report.to_json_dict())
    if report.retrain_triggered:
        state.events_log.append(
            {
                "event": "retrain_recommended",
                "month": str(args.month),
                "entropy_bits": report.entropy_bits,
                "previous_entropy_bits": report.previous_entropy_bits,
            }
        )
    human = (
        f"{args.month}: entropy {report.entropy_bits:.4f} bits over "
        f"{[int(c) for c in report.cluster_counts]}"
    )
    if report.previous_entropy_bits is not None:
        human += f" (previous {report.previous_entropy_bits:.4f})"
    if report.retrain_triggered:
        human += " - RETRAIN RECOMMENDED: diversity dropped beyond the trigger"
    _emit(args, human, report.to_json_dict())
    return 0


def cmd_drift(args) -> int:
    config = load_config(args.config)
    state = ServiceState(config)
    kind = DriftKind(args.kind)
    method = _kl_method(config)
    if kind is DriftKind.WORKLOAD:
        log = state.workload_log
        report = workload_drift(
            state.telemetry,
            args.month,
            state.history_before(log, args.month),
            method=method,
            bins_per_axis=config.drift.histogram_bins,
            direction=config.drift.direction,
        )
    else:
        model = state.model
        if model is None:
            raise ConfigError(
                f"no cluster model at {config.model_path}; run train-clusters"
            )
        log = state.sysperf_log
        seed = args.seed if args.seed is not None else config.drift.seed
        report = sysperf_drift(
            state.telemetry,
            args.month,
            model,
            state.history_before(log, args.month),
            seed,
            method=method,
            bins_per_axis=config.drift.histogram_bins,
            direction=config.drift.direction,
        )
    log.append(report.to_json_dict())
    months, values = state._history(log)
    config.reports_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{kind.value}_kl"
    write_kl_series_csv(
        config.reports_dir / f"{stem}.csv", months, values, report.threshold
    )
    (config.reports_dir / f"{stem}.svg").write_text(
        render_kl_series_svg(
            months, values, report.threshold, title=f"{kind.value} KL by month"
        ),
        encoding="utf-8",
    )
    if not args.json:
        print(f"{'month':>8}  {'kl':>10}")
        for mk, v in zip(months, values):
            print(f"{str(mk):>8}  {v:>10.4f}")
        kl_text = f"{report.kl.value:.4f}" if report.kl else "degenerate"
        thr_text = f"{report.threshold:.4f}" if report.threshold is not None else "n/a"
        print(
            f"{args.month} {kind.value} drift: kl={kl_text} threshold={thr_text} "
            f"exceeded={report.exceeded} action={report.action.value}"
        )
    else:
        print(json.dumps(report.to_json_dict()))
    return 0


def cmd_eval(args) -> int:
    config = load_config(args.config)
    state = ServiceState(config)
    predictions = load_predictions(args.predictions)
    pairs = join_predictions(predictions, state.engine.resolved_labels())
    score = f1(pairs)
    seed = args.seed if args.seed is not None else config.eval.bootstrap_seed
    summary = bootstrap_f1(pairs, config.eval.bootstrap_resamples, seed)
    config.reports_dir.mkdir(parents=True, exist_ok=True)
    payload = {"f1": score, "bootstrap": summary.to_json_dict(), "pairs": len(pairs)}
    (config.reports_dir / "eval_summary.json").write_text(
        json.dumps(payload), encoding="utf-8"
    )
    write_histogram_csv(config.reports_dir / "eval_histogram.csv", summary)
    _emit(
        args,
        f"f1 {score:.4f} over {len(pairs)} pairs; bootstrap mean "
        f"{summary.mean_f1:.4f} std {summary.std_f1:.4f} ({summary.resamples} resamples)",
        payload,
    )
    return 0


def cmd_serve(args) -> int:
    config = load_config(args.config)
    serve(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftwatch",
        description="label curation and drift monitoring for anomaly detection telemetry",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, seed: bool = True) -> None:
        p.add_argument("--config", required=True, help="pipeline config (.toml or .json)")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        if seed:
            p.add_argument("--seed", type=int, default=None, help="override config seed")

    p = sub.add_parser("ingest", help="ingest telemetry (or label) JSONL files")
    common(p, seed=False)
    p.add_argument("files", nargs="+", help="JSONL files")
    p.add_argument("--labels", action="store_true", help="files hold label records")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train-clusters", help="train the workload cluster model")
    common(p)
    p.add_argument(
        "--months",
        type=_month_range,
        required=True,
        metavar="START:END",
        help="inclusive month range, e.g. 2023-01:2023-06",
    )
    p.set_defaults(func=cmd_train_clusters)

    p = sub.add_parser("sample", help="run sampling decisions over a point stream")
    common(p)
    p.add_argument("input", nargs="?", default=None, help="telemetry JSONL stream")
    p.add_argument("--month", type=_month, default=None, help="sample stored month")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("entropy", help="label-diversity entropy for a month")
    common(p, seed=False)
    p.add_argument("--month", type=_month, required=True)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("drift", help="monthly drift report")
    common(p)
    p.add_argument("--kind", choices=[k.value for k in DriftKind], default="workload")
    p.add_argument("--month", type=_month, required=True)
    p.set_defaults(func=cmd_drift)

    p = sub.add_parser("eval", help="score predictions against resolved labels")
    common(p)
    p.add_argument("predictions", help="predictions JSONL")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the labeling service")
    common(p, seed=False)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.command == "serve" else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except DriftwatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 0
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
