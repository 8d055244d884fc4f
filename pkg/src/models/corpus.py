from datetime import datetime, timezone
from typing import Any, Dict, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.models.models import GroundTruthClass

DEFAULT_AGENT_VOCAB: Tuple[str, ...] = (
    "supervisor",
    "search_agent",
    "stock_agent",
    "internet_search",
    "yf_price",
    "yf_timeseries",
    "llm_call",
)

# Lexical bands the generator enforces, echoed into every manifest.
COSINE_BANDS = {
    "productive_max": 0.6,
    "redundant_min": 0.3,
    "redundant_max": 0.7,
    "hard_timeseries_min": 0.86,
    "cycle_min": 0.9,
}


class GeneratorSpec(BaseModel):
    """Parameters of one synthetic corpus."""
    model_config = ConfigDict(frozen=True)

    seed: int = Field(default=42, ge=0, lt=2**64, description="Seed of the xoshiro256** stream")
    counts: Dict[GroundTruthClass, int] = Field(
        default_factory=lambda: {cls: 100 for cls in GroundTruthClass},
        description="Trajectories to generate per class"
    )
    agent_vocab: Tuple[str, ...] = Field(
        default=DEFAULT_AGENT_VOCAB,
        description="Op names by role: supervisor, search agent, stock agent, search tool, "
                    "price tool, timeseries tool, llm"
    )
    noise: float = Field(default=0.02, ge=0, lt=1, description="Character perturbation rate of repeated outputs")
    depth: int = Field(default=4, ge=4, description="Upper bound on tree depth; templates build at most four levels")
    repeat_range: Tuple[int, int] = Field(default=(3, 6), description="Repetitions for cyclic classes")
    hard_timeseries_ratio: float = Field(
        default=0.4,
        ge=0,
        le=1,
        description="Share of redundant_step trajectories using the timeseries variant"
    )

    @field_validator("counts")
    @classmethod
    def validate_counts(cls, v: Dict[GroundTruthClass, int]) -> Dict[GroundTruthClass, int]:
        negative = [c.value for c, n in v.items() if n < 0]
        if negative:
            raise ValueError(f"Counts must be non-negative: {', '.join(negative)}")
        if sum(v.values()) < 1:
            raise ValueError("Corpus must contain at least one trajectory")
        return v

    @field_validator("agent_vocab")
    @classmethod
    def validate_vocab(cls, v: Tuple[str, ...]) -> Tuple[str, ...]:
        if len(v) < len(DEFAULT_AGENT_VOCAB):
            raise ValueError(f"agent_vocab needs {len(DEFAULT_AGENT_VOCAB)} op names, got {len(v)}")
        if len(set(v)) != len(v) or any(not op for op in v):
            raise ValueError("agent_vocab entries must be distinct and non-empty")
        return v

    @model_validator(mode="after")
    def validate_repeat_range(self) -> "GeneratorSpec":
        low, high = self.repeat_range
        if low < 3:
            raise ValueError(f"repeat_range minimum must be at least 3, got {low}")
        if high < low:
            raise ValueError(f"repeat_range maximum {high} is below minimum {low}")
        return self

    @classmethod
    def per_class(cls, n: int, **kwargs) -> "GeneratorSpec":
        return cls(counts={c: n for c in GroundTruthClass}, **kwargs)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def noise_ppm(self) -> int:
        return round(self.noise * 1_000_000)

    def role(self, name: str) -> str:
        index = {
            "supervisor": 0,
            "search_agent": 1,
            "stock_agent": 2,
            "search": 3,
            "price": 4,
            "timeseries": 5,
            "llm": 6,
        }[name]
        return self.agent_vocab[index]


class TraceMetadata(BaseModel):
    """Per-trajectory generation details recorded in the manifest."""
    label: GroundTruthClass
    variant: str
    prompt_category: str
    prompt_style: str


class CorpusManifest(BaseModel):
    spec: GeneratorSpec
    counts: Dict[GroundTruthClass, int]
    labels: Dict[str, GroundTruthClass]
    metadata: Dict[str, TraceMetadata]
    cosine_bands: Dict[str, float] = Field(default_factory=lambda: dict(COSINE_BANDS))
    config: Dict[str, Any] = Field(
        default_factory=dict,
        description="Effective settings of the generating run; replayable with --config"
    )
    generated_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
