"""
Structural cycle detectors.

CDDAG flags operation-graph edges whose occurrence weight is an outlier;
CDCS flags op windows of the call stack whose frequency is an outlier.
Both use the population mean and standard deviation with a strict
``score > mu + multiplier * sigma`` test.
"""
import logging
from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.models.detection import (
    Detection,
    DetectionMethod,
    Evidence,
    EvidenceKind,
    FrequencyMap,
    WeightStats,
    canonical_order,
)
from src.models.errors import DomainError, ParameterError
from src.models.graphs import OpGraph, OpSequence

logger = logging.getLogger(__name__)

MIN_WINDOW = 3
DEFAULT_MAX_WINDOW = 20


def weight_stats(weights: Iterable[Union[int, float]]) -> WeightStats:
    """
    Population mean and standard deviation (divide by N).

    Raises:
        DomainError: if ``weights`` is empty
    """
    values = np.asarray(list(weights), dtype=np.float64)
    if values.size == 0:
        raise DomainError("weight_stats needs at least one weight")
    return WeightStats(
        mu=float(values.mean()),
        sigma=float(values.std()),
        count=int(values.size),
    )


def detect_cddag(g: OpGraph, m: float) -> Detection:
    """Flag every edge with ``w(e) > mu + m * sigma`` over the graph's edge weights."""
    if m <= 0:
        raise ParameterError(f"CDDAG multiplier m must be > 0, got {m}")

    params = {"m": m}
    if not g.edges:
        return Detection(trace_id=g.trace_id, method=DetectionMethod.CDDAG, label=0, params=params)

    stats = weight_stats(g.edges.values())
    threshold = stats.threshold(m)
    flagged = [
        Evidence(
            kind=EvidenceKind.EDGE,
            item=edge,
            score=float(weight),
            threshold=threshold,
            stage=DetectionMethod.CDDAG,
        )
        for edge, weight in g.edges.items()
        if weight > threshold
    ]

    logger.debug(
        f"CDDAG {g.trace_id}: mu={stats.mu:.4f} sigma={stats.sigma:.4f} "
        f"threshold={threshold:.4f} flagged={len(flagged)}"
    )
    return Detection(
        trace_id=g.trace_id,
        method=DetectionMethod.CDDAG,
        label=int(bool(flagged)),
        evidence=canonical_order(flagged),
        params=params,
    )


def _ops_of(c: Union[OpSequence, Sequence[str]]) -> Tuple[str, ...]:
    return c.ops if isinstance(c, OpSequence) else tuple(c)


def enumerate_subsequences(
    c: Union[OpSequence, Sequence[str]],
    min_len: int = MIN_WINDOW,
    max_len: Optional[int] = None
) -> FrequencyMap:
    """
    Count every contiguous window of length min_len..max_len, overlaps included.

    ``max_len`` defaults to min(20, n // 2), never below ``min_len``.
    Windows longer than the sequence are not counted.
    """
    ops = _ops_of(c)
    n = len(ops)
    if max_len is None:
        max_len = max(min_len, min(DEFAULT_MAX_WINDOW, n // 2))
    if min_len < MIN_WINDOW:
        raise ParameterError(f"min_len must be >= {MIN_WINDOW}, got {min_len}")
    if max_len < min_len:
        raise ParameterError(f"max_len {max_len} must be >= min_len {min_len}")

    counts: Dict[Tuple[str, ...], int] = defaultdict(int)
    positions: Dict[Tuple[str, ...], List[int]] = defaultdict(list)
    for length in range(min_len, min(max_len, n) + 1):
        for start in range(n - length + 1):
            window = ops[start:start + length]
            counts[window] += 1
            positions[window].append(start)

    return FrequencyMap(
        entries=dict(counts),
        positions={window: tuple(starts) for window, starts in positions.items()},
        min_len=min_len,
        max_len=max_len,
    )


def effective_max_len(max_len: int, n: int) -> int:
    """Cap the window bound at half the sequence; a longer window cannot occur twice side by side."""
    return max(MIN_WINDOW, min(max_len, n // 2))


def detect_cdcs(
    c: OpSequence,
    k: float,
    max_len: int = DEFAULT_MAX_WINDOW
) -> Detection:
    """
    Flag op windows whose frequency exceeds ``mu + k * sigma``.

    Statistics run over every counted window, frequency-1 windows included.
    Evidence lists the flagged windows with the span ids of each occurrence.
    """
    if k <= 0:
        raise ParameterError(f"CDCS multiplier k must be > 0, got {k}")
    if max_len < MIN_WINDOW:
        raise ParameterError(f"max_len must be >= {MIN_WINDOW}, got {max_len}")

    params = {"k": k, "max_len": max_len}
    frequencies = enumerate_subsequences(c, MIN_WINDOW, effective_max_len(max_len, len(c)))
    if not frequencies.entries:
        return Detection(trace_id=c.trace_id, method=DetectionMethod.CDCS, label=0, params=params)

    stats = weight_stats(frequencies.entries.values())
    threshold = stats.threshold(k)
    flagged = []
    for window, frequency in frequencies.entries.items():
        if frequency <= threshold:
            continue
        occurrences = tuple(
            c.span_refs[start:start + len(window)]
            for start in frequencies.positions[window]
        )
        flagged.append(Evidence(
            kind=EvidenceKind.SUBSEQUENCE,
            item=window,
            score=float(frequency),
            threshold=threshold,
            stage=DetectionMethod.CDCS,
            occurrences=occurrences,
        ))

    logger.debug(
        f"CDCS {c.trace_id}: windows={stats.count} mu={stats.mu:.4f} "
        f"sigma={stats.sigma:.4f} flagged={len(flagged)}"
    )
    return Detection(
        trace_id=c.trace_id,
        method=DetectionMethod.CDCS,
        label=int(bool(flagged)),
        evidence=canonical_order(flagged),
        params=params,
    )
