from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.models.errors import SchemaError, TrajectoryValidationError


class SpanStatus(str, Enum):
    """Outcome recorded on a span."""
    OK = "ok"
    ERROR = "error"


class GroundTruthClass(str, Enum):
    """
    Ground-truth category of a trajectory.

    Only silent and error cycles are bad cycles; every other class is
    negative for the binary task.
    """
    PRODUCTIVE = "productive"
    ERROR = "error"
    INTERMEDIATE_ERROR = "intermediate_error"
    REDUNDANT_STEP = "redundant_step"
    SILENT_CYCLE = "silent_cycle"
    ERROR_CYCLE = "error_cycle"

    @property
    def binary(self) -> bool:
        """True when the class counts as a bad cycle."""
        return self in (GroundTruthClass.SILENT_CYCLE, GroundTruthClass.ERROR_CYCLE)


class Span(BaseModel):
    """
    One traced operation.

    Field aliases follow the newline-delimited interchange format, so a
    record decoded with ``Span.model_validate_json`` and a span built in
    code with field names are the same object.
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="ignore")

    trace_id: str = Field(
        ...,
        min_length=1,
        description="Identifier shared by all spans of one trajectory"
    )
    span_id: str = Field(
        ...,
        min_length=1,
        description="Identifier unique within the trajectory"
    )
    parent_span_id: Optional[str] = Field(
        ...,
        description="Parent span id, null for a root span"
    )
    op: str = Field(
        ...,
        min_length=1,
        description="Operation name (agent, tool or model call)"
    )
    input: str = Field(
        ...,
        description="Input payload as opaque text"
    )
    output: str = Field(
        ...,
        description="Output payload as opaque text"
    )
    start_time: int = Field(
        ...,
        alias="start_time_ns",
        strict=True,
        description="Start time in nanoseconds since epoch"
    )
    end_time: Optional[int] = Field(
        default=None,
        alias="end_time_ns",
        strict=True,
        description="End time in nanoseconds since epoch"
    )
    status: SpanStatus = Field(
        default=SpanStatus.OK,
        description="ok or error"
    )
    error_type: Optional[str] = Field(
        default=None,
        description="Error category, e.g. recursion_limit"
    )

    @field_validator('parent_span_id', mode='before')
    @classmethod
    def empty_parent_is_root(cls, v):
        """Exporters write an empty string for root spans."""
        if v == "":
            return None
        return v

    @model_validator(mode='after')
    def check_span_invariants(self) -> "Span":
        if self.end_time is not None and self.end_time < self.start_time:
            raise SchemaError(
                "end_time_ns",
                f"end {self.end_time} precedes start {self.start_time}"
            )
        if self.parent_span_id == self.span_id:
            raise SchemaError("parent_span_id", f"span {self.span_id} is its own parent")
        return self

    @property
    def is_root(self) -> bool:
        return self.parent_span_id is None

    @property
    def failed(self) -> bool:
        return self.status == SpanStatus.ERROR


class Trajectory(BaseModel):
    """
    Validated set of spans sharing one trace id.

    Construction runs the structural checks, so every Trajectory instance
    has referential integrity, acyclic parent links and at least one root.
    """
    model_config = ConfigDict(frozen=True)

    trace_id: str = Field(..., min_length=1)
    spans: Tuple[Span, ...] = Field(..., description="Spans in ingestion order")
    label: Optional[GroundTruthClass] = Field(
        default=None,
        description="Ground-truth class, present for generated or labeled data"
    )

    @model_validator(mode='after')
    def check_structure(self) -> "Trajectory":
        validate_spans(self.trace_id, self.spans)
        return self

    def span_by_id(self) -> Dict[str, Span]:
        return {span.span_id: span for span in self.spans}

    @property
    def roots(self) -> List[Span]:
        return [span for span in self.spans if span.is_root]

    @property
    def binary_label(self) -> Optional[int]:
        if self.label is None:
            return None
        return int(self.label.binary)


def validate_spans(trace_id: str, spans: Tuple[Span, ...]) -> None:
    """
    Check the trajectory invariants over a group of spans.

    Raises:
        TrajectoryValidationError: naming the offending span ids
    """
    if not spans:
        raise TrajectoryValidationError(trace_id, "no spans")

    foreign = [s.span_id for s in spans if s.trace_id != trace_id]
    if foreign:
        raise TrajectoryValidationError(trace_id, "spans from another trace", foreign)

    seen: Dict[str, Span] = {}
    duplicates: List[str] = []
    for span in spans:
        if span.span_id in seen:
            duplicates.append(span.span_id)
        seen[span.span_id] = span
    if duplicates:
        raise TrajectoryValidationError(trace_id, "duplicate span ids", sorted(set(duplicates)))

    orphans = [
        s.span_id for s in spans
        if s.parent_span_id is not None and s.parent_span_id not in seen
    ]
    if orphans:
        raise TrajectoryValidationError(trace_id, "dangling parent_span_id", orphans)

    cycle = _find_parent_cycle(seen)
    if cycle:
        raise TrajectoryValidationError(trace_id, "parent-link cycle", cycle)
    # acyclic finite parent links always end at a root


def _find_parent_cycle(spans: Dict[str, Span]) -> List[str]:
    """Walk parent links from every span; return the first cycle met, in link order."""
    done: set = set()
    for start in sorted(spans):
        path: List[str] = []
        on_path: Dict[str, int] = {}
        current: Optional[str] = start
        while current is not None and current not in done:
            if current in on_path:
                return path[on_path[current]:]
            on_path[current] = len(path)
            path.append(current)
            current = spans[current].parent_span_id
        done.update(path)
    return []
