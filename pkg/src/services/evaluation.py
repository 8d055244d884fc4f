import csv
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence

from pydantic import ValidationError

from src.models.detection import Detection, DetectionMethod
from src.models.errors import DetectionFailedError, DomainError, SweepAbortedError, TraceParseError
from src.models.evaluation import (
    SWEEP_CSV_COLUMNS,
    Confusion,
    Metrics,
    PredictionRecord,
    SweepGrid,
    SweepRow,
)
from src.models.models import GroundTruthClass, Trajectory
from src.providers.base import EmbeddingProvider
from src.services.detection_service import DetectionService, DetectorConfig
from src.services.trace_loader import iter_record_lines, translate_validation_error

logger = logging.getLogger(__name__)


class ReportRow(NamedTuple):
    method: str
    threshold: str
    metrics: Metrics


# Results reported for the 1575-trajectory stock-market agent dataset
# (57 bad cycles), at each method's best parameter.
REFERENCE_ROWS = (
    ("CDDAG", "mu + 1.4*sigma", 0.65, (0.05, 0.44, 0.08), (0.97, 0.65, 0.78)),
    ("CDCS", "mu + 0.5*sigma", 0.92, (0.30, 0.88, 0.45), (1.00, 0.92, 0.96)),
    ("CDSA", "s > 0.85", 0.83, (0.16, 0.91, 0.28), (1.00, 0.82, 0.90)),
    ("Hybrid", "s > 0.83, mu + 0.5*sigma", 0.98, (0.62, 0.86, 0.72), (0.99, 0.98, 0.99)),
)


# ============================================================================
# Scoring
# ============================================================================

def score(predictions: Mapping[str, int], truth: Mapping[str, int]) -> Metrics:
    """
    Compare binary predictions with binary ground truth.

    Raises:
        DomainError: the two maps do not cover the same trace ids
    """
    missing = sorted(set(truth) - set(predictions))
    unexpected = sorted(set(predictions) - set(truth))
    if missing or unexpected:
        parts = []
        if missing:
            parts.append(f"missing predictions for {', '.join(missing)}")
        if unexpected:
            parts.append(f"no ground truth for {', '.join(unexpected)}")
        raise DomainError("; ".join(parts))

    tp = fp = fn = tn = 0
    for trace_id, actual in truth.items():
        predicted = predictions[trace_id]
        if predicted and actual:
            tp += 1
        elif predicted:
            fp += 1
        elif actual:
            fn += 1
        else:
            tn += 1
    return Metrics.from_confusion(Confusion(tp=tp, fp=fp, fn=fn, tn=tn))


def binary_truth(labels: Mapping[str, GroundTruthClass]) -> Dict[str, int]:
    return {trace_id: int(cls.binary) for trace_id, cls in labels.items()}


def predictions_of(detections: Iterable[Detection]) -> Dict[str, int]:
    return {d.trace_id: d.label for d in detections}


def best_row(rows: Sequence[SweepRow]) -> SweepRow:
    """Row with the highest cycle F1; the earliest grid value wins ties."""
    if not rows:
        raise DomainError("No sweep rows to choose from")
    best = rows[0]
    for row in rows[1:]:
        if row.metrics.cycle.f1 > best.metrics.cycle.f1:
            best = row
    return best


def class_breakdown(
    predictions: Mapping[str, int],
    labels: Mapping[str, GroundTruthClass],
    variants: Optional[Mapping[str, str]] = None
) -> Dict[str, Dict[str, int]]:
    """
    Flagged counts per ground-truth class.

    With ``variants`` the result also has ``class/variant`` entries.
    """
    breakdown: Dict[str, Dict[str, int]] = {}

    def bump(key: str, flagged: int) -> None:
        entry = breakdown.setdefault(key, {"total": 0, "flagged": 0})
        entry["total"] += 1
        entry["flagged"] += flagged

    for trace_id in sorted(labels):
        if trace_id not in predictions:
            continue
        cls = labels[trace_id].value
        bump(cls, predictions[trace_id])
        if variants and trace_id in variants:
            bump(f"{cls}/{variants[trace_id]}", predictions[trace_id])
    return dict(sorted(breakdown.items()))


# ============================================================================
# Sweeps
# ============================================================================

def sweep(
    trajectories: Sequence[Trajectory],
    grid: SweepGrid,
    base: DetectorConfig,
    truth: Mapping[str, int],
    provider: Optional[EmbeddingProvider] = None,
    workers: int = 4
) -> List[SweepRow]:
    """
    Score the method at every grid value, in grid order.

    Raises:
        SweepAbortedError: a detector failed on some trajectory
    """
    rows: List[SweepRow] = []
    config = base.model_copy(update={"method": grid.method})
    for value in grid.values:
        service = DetectionService(config.with_value(grid.param, value), provider, workers)
        try:
            detections = service.run(trajectories)
        except DetectionFailedError as e:
            logger.error(f"Sweep {grid.method.value}/{grid.param}={value} aborted on {e.trace_id}")
            raise SweepAbortedError(e.trace_id, e.cause) from e

        predictions = predictions_of(detections)
        metrics = score(predictions, truth)
        rows.append(SweepRow(
            method=grid.method,
            param=grid.param,
            value=value,
            metrics=metrics,
            flagged=sum(predictions.values()),
        ))
        logger.info(
            f"Sweep {grid.method.value} {grid.param}={value}: "
            f"cycle F1 {metrics.cycle.f1:.3f}, flagged {rows[-1].flagged}"
        )
    return rows


def write_sweep_csv(rows: Iterable[SweepRow], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SWEEP_CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.csv_row())


# ============================================================================
# Prediction files
# ============================================================================

def write_predictions(detections: Iterable[Detection], path: Path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for detection in detections:
            handle.write(json.dumps(detection.prediction_record(), separators=(",", ":")))
            handle.write("\n")
            count += 1
    return count


def read_predictions(path: Path) -> List[PredictionRecord]:
    """
    Raises:
        TraceParseError: a line is not a valid prediction record
    """
    records = []
    for number, line in iter_record_lines(path):
        try:
            records.append(PredictionRecord.model_validate_json(line))
        except ValidationError as e:
            raise translate_validation_error(e, number) from None
    seen = set()
    for record in records:
        if record.trace_id in seen:
            raise TraceParseError("trace_id", f"duplicate prediction for {record.trace_id}")
        seen.add(record.trace_id)
    return records


# ============================================================================
# Reports
# ============================================================================

def threshold_text(method: DetectionMethod, params: Mapping[str, object]) -> str:
    if method == DetectionMethod.CDDAG:
        return f"mu + {params.get('m')}*sigma"
    if method == DetectionMethod.CDCS:
        return f"mu + {params.get('k')}*sigma"
    if method == DetectionMethod.CDSA:
        return f"s > {params.get('phi')}"
    return f"s > {params.get('phi')}, mu + {params.get('k')}*sigma"


def _table_line(method: str, threshold: str, accuracy: float, cycle, non_cycle) -> str:
    numbers = " ".join(f"{value:>6.2f}" for value in (*cycle, *non_cycle))
    return f"{method:<14} {threshold:<26} {accuracy:>6.2f}   {numbers}"


def format_report(rows: Sequence[ReportRow], reference: bool = False) -> str:
    """Plain-text results table; ``reference`` appends the published figures."""
    header = (
        f"{'Method':<14} {'Threshold':<26} {'Acc':>6}   "
        f"{'C-P':>6} {'C-R':>6} {'C-F1':>6} {'N-P':>6} {'N-R':>6} {'N-F1':>6}"
    )
    lines = [header, "-" * len(header)]
    for row in rows:
        m = row.metrics
        lines.append(_table_line(
            row.method,
            row.threshold,
            m.accuracy,
            (m.cycle.precision, m.cycle.recall, m.cycle.f1),
            (m.non_cycle.precision, m.non_cycle.recall, m.non_cycle.f1),
        ))
        c = m.confusion
        lines.append(f"{'':<14} tp={c.tp} fp={c.fp} fn={c.fn} tn={c.tn}")
    if reference:
        lines.append("")
        lines.append("Reference (stock-market agent dataset, 1575 trajectories)")
        for method, threshold, accuracy, cycle, non_cycle in REFERENCE_ROWS:
            lines.append(_table_line(method, threshold, accuracy, cycle, non_cycle))
    return "\n".join(lines) + "\n"


def report_json(rows: Sequence[ReportRow]) -> dict:
    return {
        "results": [
            {"method": row.method, "threshold": row.threshold, **row.metrics.model_dump(mode="json")}
            for row in rows
        ]
    }
