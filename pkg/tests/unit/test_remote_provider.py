import json
from unittest.mock import Mock

import httpx
import pytest

from src.config import Settings
from src.models.errors import ProviderError
from src.providers import create_provider
from src.providers.builtin import builtin_embed
from src.providers.remote import RemoteEmbeddingProvider
from src.services.cache_service import EmbeddingCache
from src.services.circuit_breaker import CircuitBreaker

ENDPOINT = "http://embeddings.test/embed"
OTHER_ENDPOINT = "http://other-model.test/embed"


class FakeEndpoint:
    """httpx transport handler serving builtin vectors, with scriptable failures."""

    def __init__(self, dimension: int = 32, fail_first: int = 0, status_code: int = 500):
        self.dimension = dimension
        self.fail_first = fail_first
        self.status_code = status_code
        self.requests = []

    def __call__(self, request: httpx.Request) -> httpx.Response:
        texts = json.loads(request.content)["texts"]
        self.requests.append(texts)
        if len(self.requests) <= self.fail_first:
            return httpx.Response(self.status_code, json={"error": "unavailable"})
        vectors = [builtin_embed(text, self.dimension).values.tolist() for text in texts]
        return httpx.Response(200, json={"vectors": vectors})


def _provider(endpoint: FakeEndpoint, **kwargs) -> RemoteEmbeddingProvider:
    client = httpx.Client(transport=httpx.MockTransport(endpoint))
    return RemoteEmbeddingProvider(ENDPOINT, client=client, **kwargs)


def test_embeds_and_fixes_dimension_from_first_response():
    endpoint = FakeEndpoint(dimension=32)
    provider = _provider(endpoint, max_retries=0)

    vectors = provider.embed_many(["alpha", "beta", "alpha"])

    assert [v.dimension for v in vectors] == [32, 32, 32]
    assert provider.dimension == 32
    # duplicate texts are requested once
    assert endpoint.requests == [["alpha", "beta"]]


def test_batches_respect_batch_size():
    endpoint = FakeEndpoint()
    provider = _provider(endpoint, batch_size=2, max_retries=0)
    provider.embed_many(["a1", "a2", "a3", "a4", "a5"])
    assert [len(batch) for batch in endpoint.requests] == [2, 2, 1]


def test_empty_batch_sends_nothing():
    endpoint = FakeEndpoint()
    assert _provider(endpoint).embed_many([]) == []
    assert endpoint.requests == []


def test_retries_then_succeeds():
    endpoint = FakeEndpoint(fail_first=1)
    provider = _provider(endpoint, max_retries=2)

    assert len(provider.embed_many(["alpha"])) == 1
    assert len(endpoint.requests) == 2
    assert provider.breaker.get_state() == "closed"


def test_exhausted_retries_raise_provider_error():
    endpoint = FakeEndpoint(fail_first=10)
    provider = _provider(endpoint, max_retries=1)

    with pytest.raises(ProviderError):
        provider.embed_many(["alpha"])
    assert len(endpoint.requests) == 2


def test_open_circuit_fails_fast():
    endpoint = FakeEndpoint(fail_first=10)
    breaker = CircuitBreaker(ENDPOINT, failure_threshold=2, timeout_seconds=60)
    provider = _provider(endpoint, max_retries=0, breaker=breaker)

    for _ in range(2):
        with pytest.raises(ProviderError):
            provider.embed_many(["alpha"])
    assert breaker.get_state() == "open"

    with pytest.raises(ProviderError, match="circuit open"):
        provider.embed_many(["alpha"])
    assert len(endpoint.requests) == 2


def test_wrong_vector_count_is_retried_as_failure():
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(200, json={"vectors": []})

    provider = RemoteEmbeddingProvider(
        ENDPOINT, client=httpx.Client(transport=httpx.MockTransport(handler)), max_retries=1,
    )
    with pytest.raises(ProviderError):
        provider.embed_many(["alpha"])
    assert provider.requests_sent == 2


def test_dimension_mismatch_is_provider_error():
    endpoint = FakeEndpoint(dimension=32)
    provider = _provider(endpoint, dimension=64, max_retries=0)
    with pytest.raises(ProviderError, match="dimension"):
        provider.embed_many(["alpha"])


def test_missing_endpoint_rejected():
    with pytest.raises(ProviderError):
        RemoteEmbeddingProvider("")


def test_cache_hits_skip_the_endpoint():
    endpoint = FakeEndpoint(dimension=32)
    cache = EmbeddingCache("redis://unused", ttl_seconds=60, client=Mock())
    cached_key = EmbeddingCache.key_for(EmbeddingCache.scope_for("remote", ENDPOINT, 32), "alpha")
    cache.redis_client.mget.side_effect = lambda keys: [
        json.dumps(builtin_embed("alpha", 32).values.tolist()) if key == cached_key else None
        for key in keys
    ]
    provider = _provider(endpoint, dimension=32, max_retries=0, cache=cache)

    vectors = provider.embed_many(["alpha", "beta"])

    assert len(vectors) == 2
    assert endpoint.requests == [["beta"]]
    cache.redis_client.pipeline.return_value.setex.assert_called_once()
    assert cache.get_cache_stats()["hits"] == 1


def test_describe_reports_circuit_and_requests():
    endpoint = FakeEndpoint()
    provider = _provider(endpoint, max_retries=0)
    provider.embed_many(["alpha"])

    info = provider.describe()
    assert info["provider"] == "remote"
    assert info["requests_sent"] == 1
    assert info["circuit"]["state"] == "closed"


class InMemoryRedis:
    """Just enough of the redis client for EmbeddingCache."""

    def __init__(self):
        self.store = {}

    def mget(self, keys):
        return [self.store.get(key) for key in keys]

    def pipeline(self):
        return InMemoryPipeline(self.store)

    def delete(self, key):
        self.store.pop(key, None)

    def close(self):
        pass


class InMemoryPipeline:
    def __init__(self, store):
        self.store = store
        self.pending = []

    def setex(self, key, ttl, value):
        self.pending.append((key, value))

    def execute(self):
        self.store.update(self.pending)
        self.pending = []


def _cached_provider(endpoint_url, handler, redis_client, **kwargs) -> RemoteEmbeddingProvider:
    return RemoteEmbeddingProvider(
        endpoint_url,
        client=httpx.Client(transport=httpx.MockTransport(handler)),
        cache=EmbeddingCache("redis://unused", ttl_seconds=60, client=redis_client),
        max_retries=0,
        **kwargs,
    )


@pytest.mark.parametrize("dimension", [None, 32])
def test_fresh_provider_reads_what_the_previous_one_cached(dimension):
    redis_client = InMemoryRedis()
    endpoint = FakeEndpoint(dimension=32)

    first = _cached_provider(ENDPOINT, endpoint, redis_client, dimension=dimension)
    expected = first.embed_many(["alpha", "beta"])
    second = _cached_provider(ENDPOINT, endpoint, redis_client, dimension=dimension)
    again = second.embed_many(["alpha", "beta"])

    assert endpoint.requests == [["alpha", "beta"]]
    assert second.requests_sent == 0
    assert [v.values.tolist() for v in again] == [v.values.tolist() for v in expected]


def test_endpoints_do_not_share_cached_vectors():
    redis_client = InMemoryRedis()
    model_a = FakeEndpoint(dimension=32)
    model_b = FakeEndpoint(dimension=32)

    _cached_provider(ENDPOINT, model_a, redis_client, dimension=32).embed_many(["alpha"])
    _cached_provider(OTHER_ENDPOINT, model_b, redis_client, dimension=32).embed_many(["alpha"])

    assert model_a.requests == [["alpha"]]
    assert model_b.requests == [["alpha"]]
    assert len(redis_client.store) == 2


def test_scope_separates_endpoint_and_dimension():
    scope = EmbeddingCache.scope_for("remote", ENDPOINT, 32)
    assert scope != EmbeddingCache.scope_for("remote", OTHER_ENDPOINT, 32)
    assert scope != EmbeddingCache.scope_for("remote", ENDPOINT, 64)
    assert EmbeddingCache.scope_for("remote", ENDPOINT, 0).endswith(":auto")


def test_create_provider_passes_configured_dimension():
    config = Settings(
        _env_file=None,
        EMBEDDING_PROVIDER="remote",
        EMBEDDING_ENDPOINT=ENDPOINT,
        EMBEDDING_DIMENSION=32,
    )
    provider = create_provider(config)
    try:
        assert isinstance(provider, RemoteEmbeddingProvider)
        assert provider.dimension == 32
        assert provider.cache_scope == EmbeddingCache.scope_for("remote", ENDPOINT, 32)
    finally:
        provider.close()
