import itertools
import os
from typing import List, Optional, Sequence

import pytest

from src.models.models import GroundTruthClass, Span, SpanStatus, Trajectory
from src.providers.builtin import BuiltinEmbeddingProvider


# ============================================
# Pytest Configuration
# ============================================

def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line(
        "markers",
        "unit: mark test as a unit test"
    )
    config.addinivalue_line(
        "markers",
        "integration: mark test as an integration test"
    )
    config.addinivalue_line(
        "markers",
        "slow: mark test as slow running"
    )


# ============================================
# Test Environment Variables
# ============================================

SETTINGS_PREFIXES = (
    "APP_", "LOG_", "WORKERS", "DETECTION_", "CDDAG_", "CDCS_", "CDSA_", "HYBRID_",
    "MAX_SUBSEQUENCE", "EMBEDDING_", "CIRCUIT_BREAKER_", "GENERATOR_",
)


@pytest.fixture(autouse=True)
def test_env_vars(monkeypatch, tmp_path):
    """
    Isolate every test from the caller's environment.

    Settings variables are removed and the working directory moves to a
    scratch folder, so no stray .env file is picked up.
    """
    for key in list(os.environ):
        if key.startswith(SETTINGS_PREFIXES):
            monkeypatch.delenv(key, raising=False)
    monkeypatch.chdir(tmp_path)

    # Faster failure paths for testing
    monkeypatch.setenv("EMBEDDING_TIMEOUT_SECONDS", "1")
    monkeypatch.setenv("EMBEDDING_MAX_RETRIES", "1")
    monkeypatch.setenv("CIRCUIT_BREAKER_TIMEOUT_SECONDS", "5")


# ============================================
# Providers
# ============================================

@pytest.fixture
def builtin_provider() -> BuiltinEmbeddingProvider:
    return BuiltinEmbeddingProvider()


class CountingProvider(BuiltinEmbeddingProvider):
    """Builtin provider that records every batch it receives."""

    name = "counting"

    def __init__(self, dimension: int = 256):
        super().__init__(dimension)
        self.batches: List[List[str]] = []

    def embed_many(self, texts):
        self.batches.append(list(texts))
        return super().embed_many(texts)

    @property
    def texts_embedded(self) -> int:
        return sum(len(batch) for batch in self.batches)


@pytest.fixture
def counting_provider() -> CountingProvider:
    return CountingProvider()


# ============================================
# Helper Functions
# ============================================

_ids = itertools.count(1)


def make_span(
    span_id: str,
    parent: Optional[str],
    op: str,
    output: str = "",
    start: Optional[int] = None,
    trace_id: str = "t1",
    status: SpanStatus = SpanStatus.OK,
    error_type: Optional[str] = None,
) -> Span:
    """
    Helper to create a span.

    Start times default to a global increasing counter, so spans built in
    order also sort in that order.
    """
    start = next(_ids) * 1_000 if start is None else start
    return Span(
        trace_id=trace_id,
        span_id=span_id,
        parent_span_id=parent,
        op=op,
        input="",
        output=output,
        start_time=start,
        end_time=start + 500,
        status=status,
        error_type=error_type,
    )


def make_chain_trajectory(
    ops: Sequence[str],
    trace_id: str = "t1",
    label: Optional[GroundTruthClass] = None
) -> Trajectory:
    """
    Trajectory whose call stack is exactly ``ops``.

    The first op is the root; every later span hangs directly off it.
    """
    spans = [make_span("s0", None, ops[0], start=0, trace_id=trace_id)]
    for i, op in enumerate(ops[1:], start=1):
        spans.append(make_span(f"s{i}", "s0", op, start=i * 10, trace_id=trace_id))
    return Trajectory(trace_id=trace_id, spans=tuple(spans), label=label)


def make_sibling_trajectory(
    outputs: Sequence[str],
    trace_id: str = "t1",
    op: str = "tool"
) -> Trajectory:
    """Root with one child per output, all sharing the same op."""
    spans = [make_span("root", None, "supervisor", start=0, trace_id=trace_id)]
    for i, output in enumerate(outputs, start=1):
        spans.append(make_span(f"c{i:02d}", "root", op, output=output, start=i * 10, trace_id=trace_id))
    return Trajectory(trace_id=trace_id, spans=tuple(spans))


def silent_cycle_ops(repeats: int) -> List[str]:
    return ["supervisor", "llm_call"] + ["stock_agent", "llm_call", "yf_price"] * repeats + ["llm_call"]


# ============================================
# Pytest Hooks
# ============================================

def pytest_collection_modifyitems(config, items):
    """
    Modify test collection.

    Automatically mark tests based on their location.
    """
    for item in items:
        # Mark tests in tests/integration/ as integration tests
        if "integration" in str(item.fspath):
            item.add_marker(pytest.mark.integration)
        # Mark tests in tests/unit/ as unit tests
        elif "unit" in str(item.fspath):
            item.add_marker(pytest.mark.unit)
