from typing import Iterable, Optional


class CycleDetectionError(Exception):
    """Base class for every error raised by the toolkit."""


class TraceParseError(CycleDetectionError):
    """A span record could not be decoded or a field has the wrong type."""

    def __init__(self, field: str, message: str, line_number: Optional[int] = None):
        self.field = field
        self.line_number = line_number
        where = f" (line {line_number})" if line_number is not None else ""
        super().__init__(f"Malformed span record{where}: field '{field}': {message}")


class SchemaError(CycleDetectionError):
    """A span record is missing a required field or breaks a span invariant."""

    def __init__(self, field: str, message: str, line_number: Optional[int] = None):
        self.field = field
        self.line_number = line_number
        where = f" (line {line_number})" if line_number is not None else ""
        super().__init__(f"Schema violation{where}: field '{field}': {message}")


class TrajectoryValidationError(CycleDetectionError):
    """A group of spans does not form a valid trajectory."""

    def __init__(self, trace_id: str, reason: str, span_ids: Iterable[str] = ()):
        self.trace_id = trace_id
        self.reason = reason
        self.span_ids = list(span_ids)
        ids = f": {', '.join(self.span_ids)}" if self.span_ids else ""
        super().__init__(f"Trajectory {trace_id} rejected, {reason}{ids}")


class ParameterError(CycleDetectionError):
    """A detector or generator parameter is outside its valid range."""


class DomainError(CycleDetectionError):
    """An operation was applied outside its mathematical domain."""


class UndefinedSimilarityError(DomainError):
    """Cosine similarity requested for an all-zero vector."""


class ProviderError(CycleDetectionError):
    """The embedding provider failed to deliver vectors."""


class SweepAbortedError(CycleDetectionError):
    """A parameter sweep stopped because one trajectory failed."""

    def __init__(self, trace_id: str, cause: Exception):
        self.trace_id = trace_id
        self.cause = cause
        super().__init__(f"Sweep aborted on trajectory {trace_id}: {cause}")


class DetectionFailedError(CycleDetectionError):
    """A detector raised while processing one trajectory of a corpus."""

    def __init__(self, trace_id: str, cause: Exception):
        self.trace_id = trace_id
        self.cause = cause
        super().__init__(f"Detection failed on trajectory {trace_id}: {cause}")


class GenerationError(CycleDetectionError):
    """A synthetic trajectory could not satisfy its class contract."""
