from typing import List, Sequence

import pytest

from src.detectors.hybrid import detect_hybrid
from src.detectors.semantic import detect_cdsa
from src.detectors.structural import detect_cdcs
from src.generator import build_corpus
from src.models.corpus import GeneratorSpec
from src.models.detection import DetectionMethod, EvidenceKind, HybridParams, HybridScope
from src.models.models import Trajectory
from src.services.graph_views import build_call_stack
from tests.conftest import make_chain_trajectory, make_span

QUOTE = "AAPL quote 189.20 USD at 15:59, volume 41.2M"

OUTPUTS = {
    "llm_call": [
        "Plan: check the latest Apple price and summarise the move",
        "Routing the request to the stock desk for a fresh quote",
        "Reviewing the returned data before answering the user",
        "The quote looks consistent with yesterday's close",
        "Final answer drafted with price and session change",
    ],
    "stock_agent": [
        "stock agent picked up the quote task",
        "stock agent retrying the same lookup",
        "stock agent requesting another price",
    ],
}


def _looping_trajectory(extra_ops: Sequence[str] = (), extra_outputs: Sequence[str] = ()) -> Trajectory:
    """Supervisor with a flat list of children whose ops loop three times."""
    ops: List[str] = ["llm_call"] + ["stock_agent", "llm_call", "yf_price"] * 3 + list(extra_ops) + ["llm_call"]
    extras = iter(extra_outputs)
    used = {op: iter(texts) for op, texts in OUTPUTS.items()}
    spans = [make_span("s00", None, "supervisor", start=0)]
    for index, op in enumerate(ops, start=1):
        if op == "yf_price":
            output = QUOTE
        elif op in used:
            output = next(used[op])
        else:
            output = next(extras)
        spans.append(make_span(f"s{index:02d}", "s00", op, output=output, start=index * 10))
    return Trajectory(trace_id="t1", spans=tuple(spans))


def test_gate_negative_skips_embedding(counting_provider):
    t = make_chain_trajectory(["supervisor", "planner", "search", "llm_call", "writer", "critic"])
    detection = detect_hybrid(t, HybridParams(), counting_provider)

    assert detection.label == 0
    assert detection.embedding_calls == 0
    assert counting_provider.batches == []
    assert [stage.method for stage in detection.stages] == [DetectionMethod.CDCS]


def test_confirmed_cycle_reports_both_stages(builtin_provider):
    detection = detect_hybrid(_looping_trajectory(), HybridParams(k=0.5, phi=0.83), builtin_provider)

    assert detection.label == 1
    assert detection.method == DetectionMethod.HYBRID
    kinds = {e.kind for e in detection.evidence}
    assert kinds == {EvidenceKind.SUBSEQUENCE, EvidenceKind.SIBLING_PAIR}
    assert [stage.method for stage in detection.stages] == [DetectionMethod.CDCS, DetectionMethod.CDSA]
    assert detection.embedding_calls == detection.stages[1].embedding_calls
    assert detection.params == {"k": 0.5, "phi": 0.83, "max_len": 20, "scope": "full"}


def test_gate_positive_but_distinct_outputs_is_negative(builtin_provider):
    t = _looping_trajectory()
    spans = tuple(
        span.model_copy(update={"output": f"{span.output} #{span.span_id} lot {index * 37}"})
        if span.op == "yf_price" else span
        for index, span in enumerate(t.spans)
    )
    distinct = Trajectory(trace_id="t1", spans=spans)
    detection = detect_hybrid(distinct, HybridParams(phi=0.99), builtin_provider)

    assert detection.label == 0
    assert detection.evidence == ()
    assert len(detection.stages) == 2
    assert detection.stages[0].label == 1
    assert detection.embedding_calls > 0


def test_flagged_only_scope_ignores_ops_outside_windows(counting_provider):
    # the search span repeats the quote but is not part of any repeated window
    t = _looping_trajectory(extra_ops=["search"], extra_outputs=[QUOTE])
    search_id = next(span.span_id for span in t.spans if span.op == "search")

    full = detect_hybrid(t, HybridParams(), counting_provider)
    full_calls = counting_provider.texts_embedded
    scoped = detect_hybrid(t, HybridParams(scope=HybridScope.FLAGGED_ONLY), counting_provider)
    scoped_calls = counting_provider.texts_embedded - full_calls

    def pair_ids(detection):
        return {span_id for e in detection.evidence if e.kind == EvidenceKind.SIBLING_PAIR for span_id in e.item}

    assert full.label == scoped.label == 1
    assert search_id in pair_ids(full)
    assert search_id not in pair_ids(scoped)
    assert scoped_calls < full_calls


def test_default_params_used_when_none(builtin_provider):
    detection = detect_hybrid(_looping_trajectory(), None, builtin_provider)
    assert detection.params["k"] == pytest.approx(0.5)
    assert detection.params["phi"] == pytest.approx(0.83)


@pytest.mark.parametrize("k, phi, some_flagged", [(0.5, 0.83, True), (0.3, 0.7, True), (1.0, 0.95, False)])
def test_hybrid_never_flags_what_either_stage_rejects(k, phi, some_flagged, builtin_provider):
    trajectories, _ = build_corpus(GeneratorSpec.per_class(3, seed=808))
    flagged = 0
    for t in trajectories:
        hybrid = detect_hybrid(t, HybridParams(k=k, phi=phi), builtin_provider)
        cdcs = detect_cdcs(build_call_stack(t), k)
        cdsa = detect_cdsa(t, phi, builtin_provider)

        assert hybrid.label <= min(cdcs.label, cdsa.label), t.trace_id
        flagged += hybrid.label
    if some_flagged:
        assert flagged > 0
