import hashlib
import json
import logging
from typing import Dict, List, Optional, Sequence

import redis
from redis.exceptions import RedisError

from src.config import settings
from src.models.detection import EmbeddingVector

logger = logging.getLogger(__name__)


class EmbeddingCache:
    """
    Redis-backed cache of remote embedding vectors.

    Keys combine a provider scope (name, endpoint digest and configured
    dimension) with the SHA-256 of the text, so two endpoints never share
    vectors.

    Every Redis failure is logged and treated as a miss (fail-open), so
    the provider falls through to the endpoint.
    """

    def __init__(
        self,
        url: Optional[str] = None,
        ttl_seconds: Optional[int] = None,
        client: Optional[redis.Redis] = None
    ):
        self.url = url or settings.EMBEDDING_CACHE_URL
        self.ttl_seconds = ttl_seconds or settings.EMBEDDING_CACHE_TTL_SECONDS
        self.redis_client: Optional[redis.Redis] = client
        self._hits = 0
        self._misses = 0
        self._errors = 0

    def connect(self) -> None:
        """
        Create the client and verify it with a ping.

        Raises:
            RedisError: if Redis cannot be reached
        """
        if self.redis_client is None:
            self.redis_client = redis.Redis.from_url(
                self.url,
                decode_responses=True,
                socket_connect_timeout=5,
                socket_timeout=5,
            )
        self.redis_client.ping()
        logger.info(f"Connected to embedding cache at {self.url}")

    def close(self) -> None:
        if self.redis_client is not None:
            self.redis_client.close()
            logger.info("Embedding cache connection closed")

    @staticmethod
    def scope_for(provider: str, endpoint: str, dimension: int) -> str:
        """Key prefix of one provider; a dimension of 0 means taken from the endpoint."""
        endpoint_digest = hashlib.sha256(endpoint.encode("utf-8")).hexdigest()[:16]
        return f"{provider}:{endpoint_digest}:{dimension or 'auto'}"

    @staticmethod
    def key_for(scope: str, text: str) -> str:
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        return f"embedding:{scope}:{digest}"

    def get_many(self, keys: Sequence[str]) -> Dict[str, EmbeddingVector]:
        """Return the cached vectors among ``keys``; missing or unreadable keys are absent."""
        if not keys or self.redis_client is None:
            return {}
        try:
            payloads = self.redis_client.mget(list(keys))
        except RedisError as e:
            self._errors += 1
            logger.warning(f"Embedding cache read failed, continuing without cache: {e}")
            return {}

        found: Dict[str, EmbeddingVector] = {}
        for key, payload in zip(keys, payloads):
            if payload is None:
                self._misses += 1
                continue
            try:
                found[key] = EmbeddingVector(values=json.loads(payload))
                self._hits += 1
            except (json.JSONDecodeError, ValueError) as e:
                logger.error(f"Discarding corrupted cache entry {key}: {e}")
                self._misses += 1
                self._delete(key)
        logger.debug(f"Embedding cache: {len(found)}/{len(keys)} hits")
        return found

    def set_many(self, items: Dict[str, EmbeddingVector]) -> bool:
        if not items or self.redis_client is None:
            return False
        try:
            pipeline = self.redis_client.pipeline()
            for key, vector in items.items():
                pipeline.setex(key, self.ttl_seconds, json.dumps(vector.values.tolist()))
            pipeline.execute()
            return True
        except RedisError as e:
            self._errors += 1
            logger.warning(f"Embedding cache write failed: {e}")
            return False

    def _delete(self, key: str) -> None:
        try:
            self.redis_client.delete(key)
        except RedisError:
            self._errors += 1

    def get_cache_stats(self) -> dict:
        total = self._hits + self._misses
        return {
            "hits": self._hits,
            "misses": self._misses,
            "errors": self._errors,
            "total_requests": total,
            "hit_rate_percent": round(self._hits / total * 100, 2) if total else 0.0,
        }

    def keys_for(self, scope: str, texts: Sequence[str]) -> List[str]:
        return [self.key_for(scope, text) for text in texts]
