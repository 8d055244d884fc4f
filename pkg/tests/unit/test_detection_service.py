import pytest
from pydantic import ValidationError

from src.config import load_settings
from src.models.detection import DetectionMethod, HybridScope
from src.models.errors import DetectionFailedError, ProviderError
from src.providers.base import EmbeddingProvider
from src.services.detection_service import DetectionService, DetectorConfig, summarize
from tests.conftest import make_chain_trajectory, make_sibling_trajectory, silent_cycle_ops


class FailingProvider(EmbeddingProvider):
    name = "failing"
    dimension = 16

    def embed_many(self, texts):
        raise ProviderError("endpoint down")


def _corpus():
    return [
        make_chain_trajectory(silent_cycle_ops(4), trace_id="t3"),
        make_chain_trajectory(["supervisor", "planner", "search", "writer"], trace_id="t1"),
        make_chain_trajectory(silent_cycle_ops(3), trace_id="t2"),
    ]


def test_config_from_settings_routes_hybrid_thresholds():
    config = load_settings(overrides={"HYBRID_K": 0.6, "CDCS_K": 1.1, "HYBRID_PHI": 0.9})

    hybrid = DetectorConfig.from_settings(config)
    cdcs = DetectorConfig.from_settings(config, method="cdcs")

    assert hybrid.method == DetectionMethod.HYBRID
    assert (hybrid.k, hybrid.phi) == (0.6, 0.9)
    assert (cdcs.k, cdcs.phi) == (1.1, 0.85)
    assert hybrid.scope == HybridScope.FULL


def test_with_value_validates():
    config = DetectorConfig(method=DetectionMethod.CDDAG)
    assert config.with_value("m", 2.0).m == 2.0
    with pytest.raises(ValidationError):
        config.with_value("m", 0)


def test_semantic_methods_need_a_provider():
    with pytest.raises(ValueError):
        DetectionService(DetectorConfig(method=DetectionMethod.CDSA))
    assert not DetectorConfig(method=DetectionMethod.CDCS).needs_provider


def test_run_returns_detections_sorted_by_trace_id():
    service = DetectionService(DetectorConfig(method=DetectionMethod.CDCS, k=0.5), workers=2)
    detections = service.run(_corpus())

    assert [d.trace_id for d in detections] == ["t1", "t2", "t3"]
    assert [d.label for d in detections] == [0, 1, 1]
    assert summarize(detections) == {
        "trajectories": 3,
        "flagged": 2,
        "embedding_calls": 0,
        "comparisons": 0,
    }


@pytest.mark.asyncio
async def test_detect_corpus_is_awaitable(builtin_provider):
    service = DetectionService(DetectorConfig(method=DetectionMethod.CDSA, phi=0.83), builtin_provider)
    detections = await service.detect_corpus([
        make_sibling_trajectory(["same output text", "same output text"], trace_id="b"),
        make_sibling_trajectory(["AAPL 189.20", "Fed minutes released"], trace_id="a"),
    ])
    assert [(d.trace_id, d.label) for d in detections] == [("a", 0), ("b", 1)]


@pytest.mark.asyncio
async def test_failure_names_the_trajectory():
    service = DetectionService(DetectorConfig(method=DetectionMethod.CDSA), FailingProvider())
    with pytest.raises(DetectionFailedError) as exc_info:
        await service.detect_corpus([make_sibling_trajectory(["x1", "x2"], trace_id="bad")])
    assert exc_info.value.trace_id == "bad"
    assert isinstance(exc_info.value.cause, ProviderError)


def test_each_method_dispatches(builtin_provider):
    t = make_chain_trajectory(silent_cycle_ops(3))
    for method in DetectionMethod:
        service = DetectionService(DetectorConfig(method=method), builtin_provider)
        assert service.detect_one(t).method == method
