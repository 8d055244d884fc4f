import math
import random
from collections import Counter
from typing import Dict, Sequence

import numpy as np
import pytest

from src.detectors.semantic import cosine, detect_cdsa, score_sibling_pairs, sibling_pairs
from src.models.detection import EmbeddingVector, EvidenceKind
from src.models.errors import DomainError, ParameterError, UndefinedSimilarityError
from src.models.models import Trajectory
from src.providers.base import EmbeddingProvider
from tests.conftest import make_sibling_trajectory, make_span

PRICE = "AAPL last traded at 189.20 USD, up 0.4% on the session"
NEWS = "Regulators opened a review of the chip supplier merger this morning"
FILING = "Quarterly filing shows inventory write-downs across three segments"


def _vec(*values) -> EmbeddingVector:
    return EmbeddingVector(values=values)


# ============================================
# cosine
# ============================================

def test_cosine_basic_values():
    assert cosine(_vec(1, 2, 3), _vec(2, 4, 6)) == pytest.approx(1.0)
    assert cosine(_vec(1, 0), _vec(0, 1)) == pytest.approx(0.0)
    assert cosine(_vec(1, 1), _vec(-1, -1)) == pytest.approx(-1.0)


def test_cosine_stays_in_range():
    rng = np.random.default_rng(5)
    for _ in range(200):
        u, v = rng.normal(size=(2, 32))
        assert -1.0 <= cosine(_vec(*u), _vec(*v)) <= 1.0


def test_cosine_dimension_mismatch():
    with pytest.raises(DomainError):
        cosine(_vec(1, 0), _vec(1, 0, 0))


def test_cosine_zero_vector_is_undefined():
    with pytest.raises(UndefinedSimilarityError):
        cosine(_vec(0, 0), _vec(1, 0))


# ============================================
# Sibling pairs
# ============================================

def test_sibling_pairs_grouped_by_parent():
    t = Trajectory(trace_id="t1", spans=(
        make_span("r2", None, "supervisor", start=0),
        make_span("r1", None, "supervisor", start=1),
        make_span("c", "r1", "tool", start=2),
        make_span("b", "r1", "tool", start=3),
        make_span("a", "r1", "tool", start=4),
        make_span("x", "c", "llm_call", start=5),
    ))
    pairs = [(left.span_id, right.span_id) for left, right in sibling_pairs(t)]
    assert pairs == [("r1", "r2"), ("a", "b"), ("a", "c"), ("b", "c")]


def test_only_child_has_no_pairs():
    assert sibling_pairs(make_sibling_trajectory(["only"])) == []


def test_score_skips_empty_outputs(counting_provider):
    t = make_sibling_trajectory([PRICE, "", "   ", NEWS])
    scored, embedded = score_sibling_pairs(t, counting_provider)

    assert [(p.left_span_id, p.right_span_id) for p in scored] == [("c01", "c04")]
    assert embedded == 2
    assert counting_provider.batches == [[PRICE, NEWS]]


# ============================================
# CDSA
# ============================================

def test_cdsa_flags_identical_sibling_outputs(builtin_provider):
    t = make_sibling_trajectory([PRICE, NEWS, PRICE])
    detection = detect_cdsa(t, 0.83, builtin_provider)

    assert detection.label == 1
    assert len(detection.evidence) == 1
    evidence = detection.evidence[0]
    assert evidence.kind == EvidenceKind.SIBLING_PAIR
    assert evidence.item == ("c01", "c03")
    assert evidence.parent_span_id == "root"
    assert evidence.score == pytest.approx(1.0)
    assert detection.embedding_calls == 3
    assert detection.comparisons == 3
    assert detection.params == {"phi": 0.83, "provider": "builtin"}


def test_cdsa_distinct_outputs_are_negative(builtin_provider):
    detection = detect_cdsa(make_sibling_trajectory([PRICE, NEWS, FILING]), 0.83, builtin_provider)
    assert detection.label == 0
    assert detection.comparisons == 3


def test_cdsa_threshold_is_strict(builtin_provider):
    """Identical outputs score exactly 1 and phi = 1 never flags."""
    detection = detect_cdsa(make_sibling_trajectory([PRICE, PRICE]), 1.0, builtin_provider)
    assert detection.label == 0


def test_cdsa_no_pairs_means_no_embedding(counting_provider):
    detection = detect_cdsa(make_sibling_trajectory([PRICE]), 0.83, counting_provider)
    assert detection.label == 0
    assert detection.embedding_calls == 0
    assert counting_provider.batches == []


def test_cdsa_pair_filter(builtin_provider):
    t = make_sibling_trajectory([PRICE, PRICE, PRICE])
    detection = detect_cdsa(
        t, 0.83, builtin_provider,
        pair_filter=lambda left, right: "c03" not in (left.span_id, right.span_id),
    )
    assert [e.item for e in detection.evidence] == [("c01", "c02")]


@pytest.mark.parametrize("phi", [0, -0.2, 1.01])
def test_cdsa_rejects_phi_out_of_range(phi, builtin_provider):
    with pytest.raises(ParameterError):
        detect_cdsa(make_sibling_trajectory([PRICE, NEWS]), phi, builtin_provider)


# ============================================
# Randomised properties
# ============================================

def test_cosine_is_symmetric_on_random_vectors():
    rng = random.Random(31)
    for _ in range(500):
        d = rng.randint(1, 64)
        u = EmbeddingVector(values=[rng.uniform(-5, 5) for _ in range(d)])
        v = EmbeddingVector(values=[rng.uniform(-5, 5) for _ in range(d)])
        assert abs(cosine(u, v) - cosine(v, u)) < 1e-12


def _random_tree(rng: random.Random, size: int) -> Trajectory:
    spans = [make_span("n000", None, "supervisor", output="final answer", start=0)]
    for i in range(1, size):
        parent = spans[rng.randrange(len(spans))].span_id
        op = rng.choice(["stock_agent", "search_agent", "yf_price", "llm_call"])
        spans.append(make_span(f"n{i:03d}", parent, op, output=f"output {i} of {op}", start=i * 10))
    return Trajectory(trace_id="t1", spans=tuple(spans))


def test_comparisons_are_per_parent_not_all_pairs(builtin_provider):
    rng = random.Random(5)
    for _ in range(40):
        t = _random_tree(rng, rng.randint(4, 30))
        children = Counter(span.parent_span_id for span in t.spans if span.parent_span_id is not None)
        expected = sum(math.comb(count, 2) for count in children.values())

        detection = detect_cdsa(t, 0.99, builtin_provider)

        assert len(sibling_pairs(t)) == expected
        assert detection.comparisons == expected
        if len(children) > 1:
            assert expected < math.comb(len(t.spans) - 1, 2)


# ============================================
# Provider substitution
# ============================================

class FixedVectorProvider(EmbeddingProvider):
    """Serves preset vectors by text; anything else gets its own axis."""

    name = "fixed"
    dimension = 8

    def __init__(self, vectors: Dict[str, Sequence[float]]):
        self.vectors = vectors
        self.unknown: Dict[str, int] = {}

    def embed_many(self, texts):
        result = []
        for text in texts:
            if text in self.vectors:
                result.append(EmbeddingVector(values=self.vectors[text]))
                continue
            axis = self.unknown.setdefault(text, len(self.unknown) % self.dimension)
            result.append(EmbeddingVector(values=np.eye(self.dimension)[axis]))
        return result


def test_cdsa_scores_with_whatever_the_provider_returns():
    # lexically unrelated texts, but the provider says they mean the same thing
    provider = FixedVectorProvider({
        PRICE: [1, 0, 0, 0, 0, 0, 0, 0],
        NEWS: [0.99, 0.1, 0, 0, 0, 0, 0, 0],
    })
    detection = detect_cdsa(make_sibling_trajectory([PRICE, NEWS]), 0.9, provider)

    assert detection.label == 1
    assert detection.params["provider"] == "fixed"
    assert detection.evidence[0].score == pytest.approx(0.99 / math.sqrt(0.99 ** 2 + 0.01))


def test_cdsa_orthogonal_provider_vectors_are_negative():
    provider = FixedVectorProvider({})
    detection = detect_cdsa(make_sibling_trajectory([FILING, NEWS]), 0.5, provider)

    assert detection.label == 0
    assert detection.comparisons == 1
    assert not detection.evidence
