from enum import Enum
from typing import Dict, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Subsequence = Tuple[str, ...]
ParamValue = Union[int, float, str]


class DetectionMethod(str, Enum):
    """Detector identifiers as they appear in predictions and reports."""
    CDDAG = "cddag"
    CDCS = "cdcs"
    CDSA = "cdsa"
    HYBRID = "hybrid"


class EvidenceKind(str, Enum):
    EDGE = "edge"
    SUBSEQUENCE = "subsequence"
    SIBLING_PAIR = "sibling_pair"


class HybridScope(str, Enum):
    """Which sibling pairs the confirmation stage examines."""
    FULL = "full"
    FLAGGED_ONLY = "flagged_only"


class WeightStats(BaseModel):
    """Population mean and standard deviation of a weight multiset."""
    model_config = ConfigDict(frozen=True)

    mu: float
    sigma: float = Field(..., ge=0)
    count: int = Field(..., gt=0)

    def threshold(self, multiplier: float) -> float:
        return self.mu + multiplier * self.sigma


class FrequencyMap(BaseModel):
    """
    Occurrence counts of every contiguous op window.

    ``positions`` keeps the start index of each occurrence so flagged
    windows can be traced back to spans.
    """
    model_config = ConfigDict(frozen=True)

    entries: Dict[Subsequence, int] = Field(default_factory=dict)
    positions: Dict[Subsequence, Tuple[int, ...]] = Field(default_factory=dict)
    min_len: int = Field(default=3, ge=3)
    max_len: int = Field(..., ge=3)

    @model_validator(mode='after')
    def check_bounds(self) -> "FrequencyMap":
        if self.max_len < self.min_len:
            raise ValueError(f"max_len {self.max_len} below min_len {self.min_len}")
        for key, frequency in self.entries.items():
            if not self.min_len <= len(key) <= self.max_len:
                raise ValueError(f"Window {key} outside [{self.min_len}, {self.max_len}]")
            if frequency < 1:
                raise ValueError(f"Window {key} has frequency {frequency}")
        return self


class Evidence(BaseModel):
    """One flagged item with the score that crossed the threshold."""
    model_config = ConfigDict(frozen=True)

    kind: EvidenceKind
    item: Tuple[str, ...] = Field(
        ...,
        description="Edge (parent_op, child_op), op window, or (left_span_id, right_span_id)"
    )
    score: float = Field(..., description="Edge weight, window frequency or cosine similarity")
    threshold: float = Field(..., description="Threshold value the score exceeded")
    stage: DetectionMethod
    parent_span_id: Optional[str] = Field(
        default=None,
        description="Shared parent of a sibling pair (None for the virtual super-root)"
    )
    occurrences: Tuple[Tuple[str, ...], ...] = Field(
        default=(),
        description="Span ids of every occurrence window of a flagged subsequence"
    )

    def sort_key(self):
        return (-self.score, self.item, self.stage.value)


def canonical_order(evidence) -> Tuple[Evidence, ...]:
    """Score descending, then lexicographic by item."""
    return tuple(sorted(evidence, key=Evidence.sort_key))


class Detection(BaseModel):
    """
    Binary verdict for one trajectory.

    ``embedding_calls`` counts texts sent to the embedding provider and
    ``comparisons`` counts sibling pairs whose similarity was computed.
    """
    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "trace_id": "5f0c1e2d9a7b4c3e8d6f1a2b3c4d5e6f",
                "method": "hybrid",
                "label": 1,
                "params": {"k": 0.5, "phi": 0.83, "max_len": 20, "scope": "full"},
                "embedding_calls": 7,
            }
        },
    )

    trace_id: str
    method: DetectionMethod
    label: int = Field(..., ge=0, le=1)
    evidence: Tuple[Evidence, ...] = ()
    params: Dict[str, ParamValue] = Field(default_factory=dict)
    embedding_calls: int = Field(default=0, ge=0)
    comparisons: int = Field(default=0, ge=0)
    stages: Tuple["Detection", ...] = ()

    @model_validator(mode='after')
    def check_label_matches_evidence(self) -> "Detection":
        if self.label != int(bool(self.evidence)):
            raise ValueError("label must be 1 exactly when evidence is non-empty")
        return self

    def prediction_record(self) -> dict:
        return {
            "trace_id": self.trace_id,
            "label": self.label,
            "method": self.method.value,
            "params": self.params,
            "evidence_count": len(self.evidence),
            "embedding_calls": self.embedding_calls,
        }


Detection.model_rebuild()


class HybridParams(BaseModel):
    """Parameters of the gated CDCS → CDSA pipeline."""
    model_config = ConfigDict(frozen=True)

    k: float = Field(default=0.5, gt=0, description="CDCS multiplier")
    phi: float = Field(default=0.83, gt=0, le=1, description="CDSA similarity threshold")
    max_len: int = Field(default=20, ge=3, description="Longest op window counted")
    scope: HybridScope = Field(default=HybridScope.FULL)


class EmbeddingVector(BaseModel):
    """Fixed-length real vector produced by an embedding provider."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray

    @field_validator('values', mode='before')
    @classmethod
    def as_readonly_array(cls, v) -> np.ndarray:
        array = np.array(v, dtype=np.float64).reshape(-1)
        array.setflags(write=False)
        return array

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)


class SiblingPair(BaseModel):
    """Two spans sharing a parent, left_span_id < right_span_id."""
    model_config = ConfigDict(frozen=True)

    parent_span_id: Optional[str]
    left_span_id: str
    right_span_id: str
    similarity: float = Field(..., ge=-1.0000001, le=1.0000001)

    @model_validator(mode='after')
    def check_canonical(self) -> "SiblingPair":
        if not self.left_span_id < self.right_span_id:
            raise ValueError("left_span_id must sort before right_span_id")
        return self
