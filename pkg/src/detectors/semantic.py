"""
CDSA: semantic similarity between sibling span outputs.

Only spans that share a parent are compared, and only their ``output``
payloads. Pairs where either output is empty are skipped.
"""
import itertools
import logging
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from src.models.detection import (
    Detection,
    DetectionMethod,
    EmbeddingVector,
    Evidence,
    EvidenceKind,
    SiblingPair,
    canonical_order,
)
from src.models.errors import DomainError, ParameterError, UndefinedSimilarityError
from src.models.models import Span, Trajectory
from src.providers.base import EmbeddingProvider

logger = logging.getLogger(__name__)

PairFilter = Callable[[Span, Span], bool]


def cosine(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """
    Cosine similarity clipped to [-1, 1].

    Raises:
        DomainError: dimensions differ
        UndefinedSimilarityError: either vector is all zeros
    """
    if u.dimension != v.dimension:
        raise DomainError(f"Dimension mismatch: {u.dimension} vs {v.dimension}")
    norm_u = float(np.linalg.norm(u.values))
    norm_v = float(np.linalg.norm(v.values))
    if norm_u == 0.0 or norm_v == 0.0:
        raise UndefinedSimilarityError("Cosine similarity is undefined for a zero vector")
    value = float(np.dot(u.values, v.values)) / (norm_u * norm_v)
    return min(1.0, max(-1.0, value))


def sibling_pairs(t: Trajectory) -> List[Tuple[Span, Span]]:
    """
    Every unordered pair of spans with the same parent.

    Roots are siblings under a virtual super-root. Pairs come out grouped
    by parent id (super-root first), each as (lower span_id, higher span_id).
    """
    groups: Dict[str, List[Span]] = {}
    for span in t.spans:
        groups.setdefault(span.parent_span_id or "", []).append(span)

    pairs: List[Tuple[Span, Span]] = []
    for parent in sorted(groups):
        children = sorted(groups[parent], key=lambda span: span.span_id)
        pairs.extend(itertools.combinations(children, 2))
    return pairs


def _has_output(span: Span) -> bool:
    return bool(span.output.strip())


def score_sibling_pairs(
    t: Trajectory,
    provider: EmbeddingProvider,
    pair_filter: Optional[PairFilter] = None
) -> Tuple[List[SiblingPair], int]:
    """
    Similarity of every eligible sibling pair.

    Returns:
        (scored pairs, number of texts embedded)
    """
    eligible = [
        (left, right) for left, right in sibling_pairs(t)
        if _has_output(left) and _has_output(right)
        and (pair_filter is None or pair_filter(left, right))
    ]
    if not eligible:
        return [], 0

    needed: Dict[str, Span] = {}
    for left, right in eligible:
        needed.setdefault(left.span_id, left)
        needed.setdefault(right.span_id, right)
    vectors = dict(zip(needed, provider.embed_many([span.output for span in needed.values()])))

    scored: List[SiblingPair] = []
    for left, right in eligible:
        try:
            similarity = cosine(vectors[left.span_id], vectors[right.span_id])
        except UndefinedSimilarityError:
            logger.debug(f"Skipping pair {left.span_id}/{right.span_id} in {t.trace_id}: zero vector")
            continue
        scored.append(SiblingPair(
            parent_span_id=left.parent_span_id,
            left_span_id=left.span_id,
            right_span_id=right.span_id,
            similarity=similarity,
        ))
    return scored, len(needed)


def detect_cdsa(
    t: Trajectory,
    phi: float,
    provider: EmbeddingProvider,
    pair_filter: Optional[PairFilter] = None
) -> Detection:
    """Flag sibling pairs whose output cosine similarity is strictly above ``phi``."""
    if not 0 < phi <= 1:
        raise ParameterError(f"CDSA threshold phi must be in (0, 1], got {phi}")

    scored, embedded = score_sibling_pairs(t, provider, pair_filter)
    flagged = [
        Evidence(
            kind=EvidenceKind.SIBLING_PAIR,
            item=(pair.left_span_id, pair.right_span_id),
            score=pair.similarity,
            threshold=phi,
            stage=DetectionMethod.CDSA,
            parent_span_id=pair.parent_span_id,
        )
        for pair in scored
        if pair.similarity > phi
    ]

    logger.debug(
        f"CDSA {t.trace_id}: pairs={len(scored)} embedded={embedded} flagged={len(flagged)}"
    )
    return Detection(
        trace_id=t.trace_id,
        method=DetectionMethod.CDSA,
        label=int(bool(flagged)),
        evidence=canonical_order(flagged),
        params={"phi": phi, "provider": provider.name},
        embedding_calls=embedded,
        comparisons=len(scored),
    )
