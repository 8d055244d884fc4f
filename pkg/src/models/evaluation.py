from decimal import Decimal
from typing import Dict, List

from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.models.detection import DetectionMethod, ParamValue

SWEEP_CSV_COLUMNS = (
    "method",
    "param",
    "value",
    "accuracy",
    "cycle_precision",
    "cycle_recall",
    "cycle_f1",
    "noncycle_precision",
    "noncycle_recall",
    "noncycle_f1",
    "tp",
    "fp",
    "fn",
    "tn",
)

SWEEPABLE = {
    DetectionMethod.CDDAG: ("m",),
    DetectionMethod.CDCS: ("k", "max_len"),
    DetectionMethod.CDSA: ("phi",),
    DetectionMethod.HYBRID: ("k", "phi", "max_len"),
}


def _ratio(numerator: int, denominator: int) -> float:
    return numerator / denominator if denominator else 0.0


class Confusion(BaseModel):
    """Counts with "cycle" as the positive class."""
    model_config = ConfigDict(frozen=True)

    tp: int = Field(default=0, ge=0)
    fp: int = Field(default=0, ge=0)
    fn: int = Field(default=0, ge=0)
    tn: int = Field(default=0, ge=0)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def relabeled(self) -> "Confusion":
        """Same counts with the negative class treated as positive."""
        return Confusion(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp)


class ClassMetrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    precision: float
    recall: float
    f1: float

    @classmethod
    def from_confusion(cls, c: Confusion) -> "ClassMetrics":
        precision = _ratio(c.tp, c.tp + c.fp)
        recall = _ratio(c.tp, c.tp + c.fn)
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(precision=precision, recall=recall, f1=f1)


class Metrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    cycle: ClassMetrics
    non_cycle: ClassMetrics
    accuracy: float
    confusion: Confusion

    @classmethod
    def from_confusion(cls, c: Confusion) -> "Metrics":
        return cls(
            cycle=ClassMetrics.from_confusion(c),
            non_cycle=ClassMetrics.from_confusion(c.relabeled()),
            accuracy=_ratio(c.tp + c.tn, c.total),
            confusion=c,
        )

    @property
    def per_class(self) -> dict:
        return {"cycle": self.cycle, "non_cycle": self.non_cycle}


class SweepGrid(BaseModel):
    """Values of one detector parameter, strictly increasing."""
    model_config = ConfigDict(frozen=True)

    method: DetectionMethod
    param: str
    values: List[float] = Field(..., min_length=1)

    @field_validator("values")
    @classmethod
    def strictly_increasing(cls, v: List[float]) -> List[float]:
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("Sweep values must be strictly increasing")
        return v

    @field_validator("param")
    @classmethod
    def known_param(cls, v: str, info) -> str:
        method = info.data.get("method")
        if method is not None and v not in SWEEPABLE[method]:
            raise ValueError(
                f"{method.value} has no parameter '{v}'; choose from {', '.join(SWEEPABLE[method])}"
            )
        return v

    @classmethod
    def from_range(cls, method: DetectionMethod, param: str, start: float, stop: float, step: float) -> "SweepGrid":
        """
        Inclusive arithmetic grid.

        Decimal stepping keeps 0.2..1.5 by 0.1 at exactly 14 points.
        """
        if step <= 0:
            raise ValueError(f"Sweep step must be positive, got {step}")
        first, last, delta = Decimal(str(start)), Decimal(str(stop)), Decimal(str(step))
        values = []
        current = first
        while current <= last:
            values.append(float(current))
            current += delta
        return cls(method=method, param=param, values=values)


class SweepRow(BaseModel):
    method: DetectionMethod
    param: str
    value: float
    metrics: Metrics
    flagged: int

    def csv_row(self) -> List[str]:
        m = self.metrics
        c = m.confusion
        return [
            self.method.value,
            self.param,
            _fmt(self.value),
            _fmt(m.accuracy),
            _fmt(m.cycle.precision),
            _fmt(m.cycle.recall),
            _fmt(m.cycle.f1),
            _fmt(m.non_cycle.precision),
            _fmt(m.non_cycle.recall),
            _fmt(m.non_cycle.f1),
            str(c.tp),
            str(c.fp),
            str(c.fn),
            str(c.tn),
        ]


def _fmt(value: float) -> str:
    return f"{value:.6f}".rstrip("0").rstrip(".") if value else "0"


class PredictionRecord(BaseModel):
    """One line of a predictions file."""
    model_config = ConfigDict(frozen=True, extra="ignore")

    trace_id: str = Field(..., min_length=1)
    label: int = Field(..., ge=0, le=1)
    method: DetectionMethod
    params: Dict[str, ParamValue] = Field(default_factory=dict)
    evidence_count: int = Field(default=0, ge=0)
    embedding_calls: int = Field(default=0, ge=0)
