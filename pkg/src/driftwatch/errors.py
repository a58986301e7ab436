"""Exception types shared across the pipeline."""


class DriftwatchError(Exception):
    """Base class for all pipeline errors."""


class InsufficientData(DriftwatchError):
    """Too few rows to fit or estimate anything."""


class InvalidRank(DriftwatchError):
    """Requested component count exceeds min(n, d)."""


class InvalidDimension(DriftwatchError):
    """Input vector/matrix dimensionality does not match the fitted model."""


class EmptyPeriod(DriftwatchError):
    """A requested calendar month holds no telemetry."""


class DegenerateDistribution(DriftwatchError):
    """Sample distribution too degenerate for a divergence estimate."""


class InsufficientStratifiedSample(DriftwatchError):
    """Per-cell stratified sample size fell below the usable minimum."""


class UnknownCandidate(DriftwatchError):
    """Reaction referenced a point that was never posted as a candidate."""


class UnknownPoint(DriftwatchError):
    """A label references a point_id absent from the telemetry store."""


class EmptyEvaluation(DriftwatchError):
    """No (predicted, actual) pairs to score."""


class ConfigError(DriftwatchError):
    """Invalid or unknown configuration content."""
