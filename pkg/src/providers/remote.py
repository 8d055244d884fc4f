import logging
import threading
from typing import Dict, List, Optional, Sequence

import httpx

from src.config import settings
from src.models.detection import EmbeddingVector
from src.models.errors import ProviderError
from src.providers.base import EmbeddingProvider
from src.services.cache_service import EmbeddingCache
from src.services.circuit_breaker import CircuitBreaker

logger = logging.getLogger(__name__)


class RemoteEmbeddingProvider(EmbeddingProvider):
    """
    Client for an HTTP embedding endpoint.

    Protocol: POST ``{"texts": [...]}``, response ``{"vectors": [[...], ...]}``
    in the same order. The dimension is taken from configuration or fixed by
    the first response; any later mismatch is a ProviderError.

    Each batch gets a timeout and bounded retries; a circuit breaker fails
    fast while the endpoint keeps failing. Failures always raise.
    """

    name = "remote"

    def __init__(
        self,
        endpoint: str,
        timeout_seconds: Optional[float] = None,
        max_retries: Optional[int] = None,
        dimension: Optional[int] = None,
        batch_size: int = 64,
        client: Optional[httpx.Client] = None,
        breaker: Optional[CircuitBreaker] = None,
        cache: Optional[EmbeddingCache] = None
    ):
        if not endpoint:
            raise ProviderError("Remote embedding provider needs an endpoint URL")
        self.endpoint = endpoint
        self.timeout_seconds = timeout_seconds or settings.EMBEDDING_TIMEOUT_SECONDS
        self.max_retries = settings.EMBEDDING_MAX_RETRIES if max_retries is None else max_retries
        self.dimension = dimension or 0
        self.batch_size = batch_size
        self._owns_client = client is None
        self.client = client or httpx.Client(timeout=self.timeout_seconds)
        self.breaker = breaker or CircuitBreaker(endpoint)
        self.cache = cache
        # fixed before the first request so reads and writes share keys
        self.cache_scope = EmbeddingCache.scope_for(self.name, endpoint, self.dimension)
        self.requests_sent = 0
        self._dimension_lock = threading.Lock()

    def embed_many(self, texts: Sequence[str]) -> List[EmbeddingVector]:
        if not texts:
            return []

        keys: List[str] = []
        resolved: Dict[str, EmbeddingVector] = {}
        if self.cache is not None:
            keys = self.cache.keys_for(self.cache_scope, texts)
            cached = self.cache.get_many(keys)
            resolved = {text: cached[key] for text, key in zip(texts, keys) if key in cached}

        missing = list(dict.fromkeys(text for text in texts if text not in resolved))
        fresh: Dict[str, EmbeddingVector] = {}
        for start in range(0, len(missing), self.batch_size):
            batch = missing[start:start + self.batch_size]
            fresh.update(zip(batch, self._request(batch)))

        if self.cache is not None and fresh:
            self.cache.set_many({
                self.cache.key_for(self.cache_scope, text): vector
                for text, vector in fresh.items()
            })

        resolved.update(fresh)
        return [resolved[text] for text in texts]

    def _request(self, batch: List[str]) -> List[EmbeddingVector]:
        if not self.breaker.can_execute():
            raise ProviderError(f"Embedding endpoint {self.endpoint} unavailable (circuit open)")

        last_error: Optional[Exception] = None
        for attempt in range(self.max_retries + 1):
            try:
                self.requests_sent += 1
                response = self.client.post(
                    self.endpoint,
                    json={"texts": batch},
                    timeout=self.timeout_seconds,
                )
                response.raise_for_status()
                vectors = self._parse(response.json(), len(batch))
                self.breaker.record_success()
                return vectors
            except (httpx.HTTPError, ValueError) as e:
                last_error = e
                logger.warning(
                    f"Embedding request to {self.endpoint} failed "
                    f"(attempt {attempt + 1}/{self.max_retries + 1}): {e}"
                )

        self.breaker.record_failure()
        raise ProviderError(
            f"Embedding endpoint {self.endpoint} failed after "
            f"{self.max_retries + 1} attempts: {last_error}"
        ) from last_error

    def _parse(self, payload, expected: int) -> List[EmbeddingVector]:
        vectors = payload.get("vectors") if isinstance(payload, dict) else None
        if not isinstance(vectors, list) or len(vectors) != expected:
            raise ValueError(f"expected {expected} vectors in response")

        parsed = [EmbeddingVector(values=vector) for vector in vectors]
        with self._dimension_lock:
            if not self.dimension:
                self.dimension = parsed[0].dimension
                logger.info(f"Remote embedding dimension fixed at {self.dimension}")
        for vector in parsed:
            if vector.dimension != self.dimension:
                raise ProviderError(
                    f"Endpoint returned dimension {vector.dimension}, expected {self.dimension}"
                )
        return parsed

    def close(self) -> None:
        if self._owns_client:
            self.client.close()
        if self.cache is not None:
            self.cache.close()

    def describe(self) -> dict:
        info = {
            "provider": self.name,
            "endpoint": self.endpoint,
            "dimension": self.dimension,
            "requests_sent": self.requests_sent,
            "circuit": self.breaker.get_metrics(),
        }
        if self.cache is not None:
            info["cache"] = self.cache.get_cache_stats()
        return info
