import asyncio
import logging
from typing import Dict, List, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field

from src.config import Settings
from src.detectors.hybrid import detect_hybrid
from src.detectors.semantic import detect_cdsa
from src.detectors.structural import detect_cdcs, detect_cddag
from src.models.detection import Detection, DetectionMethod, HybridParams, HybridScope
from src.models.errors import DetectionFailedError
from src.models.models import Trajectory
from src.providers.base import EmbeddingProvider
from src.services.graph_views import build_call_stack, build_dag

logger = logging.getLogger(__name__)


class DetectorConfig(BaseModel):
    """Method plus the thresholds it reads; invalid values fail on construction."""
    model_config = ConfigDict(frozen=True)

    method: DetectionMethod = DetectionMethod.HYBRID
    m: float = Field(default=1.4, gt=0)
    k: float = Field(default=0.5, gt=0)
    phi: float = Field(default=0.85, gt=0, le=1)
    max_len: int = Field(default=20, ge=3)
    scope: HybridScope = HybridScope.FULL

    @classmethod
    def from_settings(cls, config: Settings, method: Optional[str] = None) -> "DetectorConfig":
        chosen = DetectionMethod(method or config.DETECTION_METHOD)
        hybrid = chosen == DetectionMethod.HYBRID
        return cls(
            method=chosen,
            m=config.CDDAG_M,
            k=config.HYBRID_K if hybrid else config.CDCS_K,
            phi=config.HYBRID_PHI if hybrid else config.CDSA_PHI,
            max_len=config.MAX_SUBSEQUENCE_LEN,
            scope=HybridScope(config.HYBRID_SCOPE),
        )

    def with_value(self, param: str, value: float) -> "DetectorConfig":
        return self.model_validate({**self.model_dump(), param: value})

    @property
    def needs_provider(self) -> bool:
        return self.method in (DetectionMethod.CDSA, DetectionMethod.HYBRID)


class DetectionService:
    """
    Runs one detector over a corpus.

    Trajectories are processed concurrently on worker threads (bounded by
    ``workers``); results always come back sorted by trace_id.
    """

    def __init__(
        self,
        config: DetectorConfig,
        provider: Optional[EmbeddingProvider] = None,
        workers: int = 4
    ):
        if config.needs_provider and provider is None:
            raise ValueError(f"Method {config.method.value} needs an embedding provider")
        self.config = config
        self.provider = provider
        self.workers = max(1, workers)

    def detect_one(self, t: Trajectory) -> Detection:
        c = self.config
        if c.method == DetectionMethod.CDDAG:
            return detect_cddag(build_dag(t), c.m)
        if c.method == DetectionMethod.CDCS:
            return detect_cdcs(build_call_stack(t), c.k, c.max_len)
        if c.method == DetectionMethod.CDSA:
            return detect_cdsa(t, c.phi, self.provider)
        return detect_hybrid(
            t,
            HybridParams(k=c.k, phi=c.phi, max_len=c.max_len, scope=c.scope),
            self.provider,
        )

    def _detect_guarded(self, t: Trajectory) -> Detection:
        try:
            return self.detect_one(t)
        except Exception as e:
            raise DetectionFailedError(t.trace_id, e) from e

    async def detect_corpus(self, trajectories: Sequence[Trajectory]) -> List[Detection]:
        """
        Detect over every trajectory concurrently.

        Raises:
            DetectionFailedError: for the first trajectory that failed
        """
        semaphore = asyncio.Semaphore(self.workers)

        async def bounded(t: Trajectory) -> Detection:
            async with semaphore:
                return await asyncio.to_thread(self._detect_guarded, t)

        results = await asyncio.gather(*(bounded(t) for t in trajectories))
        return sorted(results, key=lambda detection: detection.trace_id)

    def run(self, trajectories: Sequence[Trajectory]) -> List[Detection]:
        """Synchronous wrapper around detect_corpus."""
        detections = asyncio.run(self.detect_corpus(trajectories))
        flagged = sum(d.label for d in detections)
        logger.info(
            f"{self.config.method.value}: {flagged}/{len(detections)} trajectories flagged, "
            f"{sum(d.embedding_calls for d in detections)} embedding calls"
        )
        return detections


def summarize(detections: Sequence[Detection]) -> Dict[str, int]:
    return {
        "trajectories": len(detections),
        "flagged": sum(d.label for d in detections),
        "embedding_calls": sum(d.embedding_calls for d in detections),
        "comparisons": sum(d.comparisons for d in detections),
    }
