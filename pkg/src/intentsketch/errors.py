"""Exception hierarchy shared across the package.

Every error carries an optional ``line`` attribute so dataset loaders can
annotate failures with their source line number.
"""

from __future__ import annotations


class IntentSketchError(Exception):
    """Base class for all package errors."""

    def __init__(self, message: str = "", *, line: int | None = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


# -- validation --------------------------------------------------------------

class ValidationError(IntentSketchError):
    """An input value violates a documented invariant."""


class EmptyQuery(ValidationError):
    pass


class DuplicateSlotLabel(ValidationError):
    pass


class GoldNotInOptions(ValidationError):
    pass


class InvalidOptions(ValidationError):
    pass


class InvalidDistribution(ValidationError):
    pass


class ClassIdMismatch(ValidationError):
    pass


class NonUnitVector(ValidationError):
    pass


class NegativeEntropyInput(ValidationError):
    pass


class NotEnoughCandidates(ValidationError):
    pass


class InvalidWorld(ValidationError):
    pass


class EmptyRecords(ValidationError):
    pass


class MissingBaseline(ValidationError):
    pass


# -- configuration and external data ------------------------------------------

class ConfigError(IntentSketchError):
    """Unusable run, backend, or matrix configuration."""


class ParseError(IntentSketchError):
    """Malformed external data (dataset lines, report files, responses)."""


# -- backends ------------------------------------------------------------------

class BackendError(IntentSketchError):
    """Base class for model-backend failures."""


class TransportError(BackendError):
    pass


class RateLimited(BackendError):
    pass


class MalformedResponse(BackendError):
    pass


class NoLikelihoodSupport(BackendError):
    pass


class UnparseableVerdict(BackendError):
    pass


class OracleFailure(BackendError):
    pass


class ScenarioMiss(BackendError):
    """The scripted mock has no rule matching a request."""


# -- pipeline -------------------------------------------------------------------

class PipelineError(IntentSketchError):
    pass


class EmptyCompletion(PipelineError):
    pass


class AllSketchesRejected(PipelineError):
    pass


class UnparseableAnswer(PipelineError):
    pass


class StageError(PipelineError):
    """Wraps any stage failure with the name of the stage that raised it."""

    def __init__(self, stage: str, cause: Exception) -> None:
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
