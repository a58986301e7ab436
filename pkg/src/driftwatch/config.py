"""Pipeline configuration: TOML or JSON, validated at load.

Unknown keys are rejected outright so a typo never silently falls back to
a default. Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .labelflow import LinkTemplate, validate_link_templates

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["PipelineConfig", "load_config"]

_KL_METHODS = {"gaussian", "histogram"}
_KL_DIRECTIONS = {"prev||curr", "curr||prev"}


@dataclass
class PathsConfig:
    telemetry: str = "data/telemetry.jsonl"
    labels: str = "data/labels.jsonl"
    cards: str = "data/cards.jsonl"
    decisions: str = "data/decisions.jsonl"
    model: str = "data/model.json"
    reports_dir: str = "data/reports"
    inbox: str = "data/inbox"


@dataclass
class SamplingConfig:
    k: int = 4
    budget_per_cluster: float = 50.0
    train_seed: int = 0
    sample_seed: int = 0
    window_months: int = 1
    entropy_base: float = 2.0
    trigger_drop: float = 0.25
    retrain_window_months: int = 3

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigError("sampling.k must be >= 1")
        if self.budget_per_cluster <= 0:
            raise ConfigError("sampling.budget_per_cluster must be positive")
        if self.window_months < 1:
            raise ConfigError("sampling.window_months must be >= 1")
        if self.entropy_base <= 1.0:
            raise ConfigError("sampling.entropy_base must be > 1")
        if self.trigger_drop < 0:
            raise ConfigError("sampling.trigger_drop must be >= 0")


@dataclass
class DriftConfig:
    kl_method: str = "gaussian"
    histogram_bins: int = 10
    direction: str = "prev||curr"
    seed: int = 0

    def validate(self) -> None:
        if self.kl_method not in _KL_METHODS:
            raise ConfigError(f"drift.kl_method must be one of {sorted(_KL_METHODS)}")
        if self.direction not in _KL_DIRECTIONS:
            raise ConfigError(f"drift.direction must be one of {sorted(_KL_DIRECTIONS)}")
        if self.histogram_bins < 1:
            raise ConfigError("drift.histogram_bins must be >= 1")


@dataclass
class LabelingConfig:
    webhook_url: str = ""
    quorum: int = 2
    window_hours: float = 72.0
    link_templates: list[LinkTemplate] = field(default_factory=list)
    enrolled_annotators: list[str] = field(default_factory=list)

    @property
    def window_seconds(self) -> float:
        return self.window_hours * 3600.0

    def validate(self) -> None:
        if self.quorum < 1:
            raise ConfigError("labeling.quorum must be >= 1")
        if self.window_hours <= 0:
            raise ConfigError("labeling.window_hours must be positive")
        validate_link_templates(self.link_templates)


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8321
    poll_seconds: float = 5.0
    analytics_seconds: float = 3600.0

    def validate(self) -> None:
        if not 0 < self.port < 65536:
            raise ConfigError("service.port out of range")
        if self.poll_seconds <= 0 or self.analytics_seconds <= 0:
            raise ConfigError("service poll/analytics intervals must be positive")


@dataclass
class EvalConfig:
    bootstrap_resamples: int = 1000
    bootstrap_seed: int = 0

    def validate(self) -> None:
        if self.bootstrap_resamples < 100:
            raise ConfigError("eval.bootstrap_resamples must be >= 100")


@dataclass
class PipelineConfig:
    base_dir: Path = field(default_factory=Path.cwd)
    paths: PathsConfig = field(default_factory=PathsConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    drift: DriftConfig = field(default_factory=DriftConfig)
    labeling: LabelingConfig = field(default_factory=LabelingConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def validate(self) -> None:
        self.sampling.validate()
        self.drift.validate()
        self.labeling.validate()
        self.service.validate()
        self.eval.validate()

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def telemetry_path(self) -> Path:
        return self.resolve(self.paths.telemetry)

    @property
    def labels_path(self) -> Path:
        return self.resolve(self.paths.labels)

    @property
    def cards_path(self) -> Path:
        return self.resolve(self.paths.cards)

    @property
    def decisions_path(self) -> Path:
        return self.resolve(self.paths.decisions)

    @property
    def model_path(self) -> Path:
        return self.resolve(self.paths.model)

    @property
    def reports_dir(self) -> Path:
        return self.resolve(self.paths.reports_dir)

    @property
    def inbox_dir(self) -> Path:
        return self.resolve(self.paths.inbox)


def _build(cls, data, context: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section {context!r} must be a table/object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {context}: {', '.join(unknown)}")
    return cls(**data)


def _build_labeling(data: dict) -> LabelingConfig:
    data = dict(data)
    templates = data.pop("link_templates", [])
    parsed = []
    for i, tpl in enumerate(templates):
        if not isinstance(tpl, dict) or set(tpl) != {"title", "url"}:
            raise ConfigError(
                f"labeling.link_templates[{i}] must have exactly title and url"
            )
        parsed.append(LinkTemplate(title=str(tpl["title"]), url=str(tpl["url"])))
    cfg = _build(LabelingConfig, data, "labeling")
    cfg.link_templates = parsed
    return cfg


_SECTIONS = {
    "paths": lambda d: _build(PathsConfig, d, "paths"),
    "sampling": lambda d: _build(SamplingConfig, d, "sampling"),
    "drift": lambda d: _build(DriftConfig, d, "drift"),
    "labeling": _build_labeling,
    "service": lambda d: _build(ServiceConfig, d, "service"),
    "eval": lambda d: _build(EvalConfig, d, "eval"),
}


def load_config(path: str | Path) -> PipelineConfig:
    """Load and validate a pipeline config file (.toml or .json)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    raw = path.read_bytes()
    if path.suffix == ".json":
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from None
    else:
        try:
            data = tomllib.loads(raw.decode("utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML config: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table/object")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
    config = PipelineConfig(base_dir=path.resolve().parent)
    for name, builder in _SECTIONS.items():
        if name in data:
            try:
                setattr(config, name, builder(data[name]))
            except TypeError as exc:
                raise ConfigError(f"bad value in section {name}: {exc}") from None
    config.validate()
    return config
