import json
import logging
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

from pydantic import ValidationError

from src.models.errors import SchemaError, TraceParseError, TrajectoryValidationError
from src.models.models import GroundTruthClass, Span, Trajectory

logger = logging.getLogger(__name__)


def parse_span_record(line: str, line_number: Optional[int] = None) -> Span:
    """
    Decode one interchange record into a Span.

    Unknown keys are ignored. A missing required key raises SchemaError;
    a value of the wrong type or malformed JSON raises TraceParseError.
    """
    try:
        return Span.model_validate_json(line)
    except ValidationError as e:
        raise translate_validation_error(e, line_number) from None


def translate_validation_error(error: ValidationError, line_number: Optional[int]) -> Exception:
    first = error.errors()[0]
    field = ".".join(str(part) for part in first.get("loc", ())) or "<record>"
    if first["type"] == "missing":
        return SchemaError(field, "required field missing", line_number)
    if first["type"] == "json_invalid":
        return TraceParseError("<record>", first["msg"], line_number)
    return TraceParseError(field, first["msg"], line_number)


def serialize_span(span: Span) -> str:
    """Encode a span as one interchange record; optional keys are omitted when unset."""
    record = span.model_dump(mode="json", by_alias=True)
    for key in ("end_time_ns", "error_type"):
        if record.get(key) is None:
            record.pop(key, None)
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def _group(spans: Iterable[Span]) -> Dict[str, List[Span]]:
    groups: Dict[str, List[Span]] = {}
    for span in spans:
        groups.setdefault(span.trace_id, []).append(span)
    return groups


def assemble_trajectories(
    spans: Iterable[Span],
    labels: Optional[Dict[str, GroundTruthClass]] = None
) -> List[Trajectory]:
    """
    Group spans by trace id in first-seen order and validate each group.

    Raises:
        TrajectoryValidationError: on the first invalid group
    """
    labels = labels or {}
    return [
        Trajectory(trace_id=trace_id, spans=tuple(group), label=labels.get(trace_id))
        for trace_id, group in _group(spans).items()
    ]


def assemble_trajectories_lenient(
    spans: Iterable[Span],
    labels: Optional[Dict[str, GroundTruthClass]] = None
) -> Tuple[List[Trajectory], List[dict]]:
    """
    Same grouping as assemble_trajectories, but invalid groups are set aside.

    Returns:
        (accepted trajectories, reject records with trace_id, error and span_ids)
    """
    labels = labels or {}
    accepted: List[Trajectory] = []
    rejects: List[dict] = []
    for trace_id, group in _group(spans).items():
        try:
            accepted.append(
                Trajectory(trace_id=trace_id, spans=tuple(group), label=labels.get(trace_id))
            )
        except TrajectoryValidationError as e:
            logger.warning(f"Rejected trajectory {trace_id}: {e.reason}")
            rejects.append({
                "trace_id": trace_id,
                "error": e.reason,
                "span_ids": e.span_ids,
            })
    return accepted, rejects


def iter_record_lines(path: Path) -> Iterator[Tuple[int, str]]:
    """
    Yield (line number, text) for every non-blank line of a JSONL file.

    Raises:
        TraceParseError: a line is not valid UTF-8
    """
    with open(path, "rb") as handle:
        for number, raw in enumerate(handle, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise TraceParseError("<record>", f"invalid UTF-8: {e.reason}", number) from None
            if line.strip():
                yield number, line


def iter_span_records(path: Path) -> Iterator[Span]:
    """Stream spans from a newline-delimited file, skipping blank lines."""
    for number, line in iter_record_lines(path):
        yield parse_span_record(line, line_number=number)


def read_spans(path: Path) -> List[Span]:
    spans = list(iter_span_records(path))
    logger.info(f"Read {len(spans)} spans from {path}")
    return spans


def write_trajectories(trajectories: Iterable[Trajectory], path: Path) -> int:
    """Write every span of every trajectory; returns the number of span records."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for trajectory in trajectories:
            for span in trajectory.spans:
                handle.write(serialize_span(span))
                handle.write("\n")
                count += 1
    return count


def _read_manifest(manifest_path: Path) -> dict:
    try:
        with open(manifest_path, "r", encoding="utf-8") as handle:
            manifest = json.load(handle)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise TraceParseError("<manifest>", str(e)) from None
    if not isinstance(manifest, dict):
        raise SchemaError("<manifest>", "expected a JSON object")
    return manifest


def load_labels(manifest_path: Path) -> Dict[str, GroundTruthClass]:
    """
    Read the trace_id → class map from a generator manifest.

    Raises:
        TraceParseError: the manifest is not valid JSON
        SchemaError: the labels are not an object or name an unknown class
    """
    labels = _read_manifest(manifest_path).get("labels", {})
    if not isinstance(labels, dict):
        raise SchemaError("labels", "expected an object of trace_id to class")
    known = {cls.value for cls in GroundTruthClass}
    for trace_id, value in labels.items():
        if not isinstance(value, str) or value not in known:
            raise SchemaError(f"labels.{trace_id}", f"unknown ground-truth class {value!r}")
    return {trace_id: GroundTruthClass(value) for trace_id, value in labels.items()}


def load_variants(manifest_path: Path) -> Dict[str, str]:
    """Generator variant per trace id; empty for manifests without metadata."""
    manifest = _read_manifest(manifest_path)
    return {
        trace_id: meta["variant"]
        for trace_id, meta in manifest.get("metadata", {}).items()
        if "variant" in meta
    }
