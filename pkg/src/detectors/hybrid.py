import logging
from typing import Optional

from src.detectors.semantic import PairFilter, detect_cdsa
from src.detectors.structural import detect_cdcs
from src.models.detection import (
    Detection,
    DetectionMethod,
    HybridParams,
    HybridScope,
    canonical_order,
)
from src.models.models import Trajectory
from src.providers.base import EmbeddingProvider
from src.services.graph_views import build_call_stack

logger = logging.getLogger(__name__)


def _flagged_ops_filter(gate: Detection) -> PairFilter:
    ops = {op for evidence in gate.evidence for op in evidence.item}
    return lambda left, right: left.op in ops and right.op in ops


def detect_hybrid(
    t: Trajectory,
    p: Optional[HybridParams],
    provider: EmbeddingProvider
) -> Detection:
    """
    Call-stack gate followed by semantic confirmation.

    A trajectory the gate does not flag is returned as label 0 without any
    embedding work. Otherwise CDSA decides; on a positive verdict the
    evidence of both stages is reported together.
    """
    p = p or HybridParams()
    params = {"k": p.k, "phi": p.phi, "max_len": p.max_len, "scope": p.scope.value}

    gate = detect_cdcs(build_call_stack(t), p.k, p.max_len)
    if not gate.label:
        return Detection(
            trace_id=t.trace_id,
            method=DetectionMethod.HYBRID,
            label=0,
            params=params,
            stages=(gate,),
        )

    pair_filter = _flagged_ops_filter(gate) if p.scope == HybridScope.FLAGGED_ONLY else None
    confirmation = detect_cdsa(t, p.phi, provider, pair_filter)
    confirmed = bool(confirmation.label)

    logger.debug(
        f"Hybrid {t.trace_id}: gate flagged {len(gate.evidence)} windows, "
        f"confirmation {'passed' if confirmed else 'failed'}"
    )
    return Detection(
        trace_id=t.trace_id,
        method=DetectionMethod.HYBRID,
        label=int(confirmed),
        evidence=canonical_order(gate.evidence + confirmation.evidence) if confirmed else (),
        params=params,
        embedding_calls=confirmation.embedding_calls,
        comparisons=confirmation.comparisons,
        stages=(gate, confirmation),
    )
