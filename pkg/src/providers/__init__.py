import logging

from redis.exceptions import RedisError

from src.config import Settings
from src.providers.base import EmbeddingProvider
from src.providers.builtin import BuiltinEmbeddingProvider, builtin_embed
from src.providers.remote import RemoteEmbeddingProvider
from src.services.cache_service import EmbeddingCache
from src.services.circuit_breaker import CircuitBreaker

logger = logging.getLogger(__name__)

__all__ = [
    "EmbeddingProvider",
    "BuiltinEmbeddingProvider",
    "RemoteEmbeddingProvider",
    "builtin_embed",
    "create_provider",
]


def create_provider(config: Settings) -> EmbeddingProvider:
    """Instantiate the provider selected by EMBEDDING_PROVIDER."""
    if config.EMBEDDING_PROVIDER == "builtin":
        return BuiltinEmbeddingProvider(dimension=config.EMBEDDING_DIMENSION)

    cache = None
    if config.EMBEDDING_CACHE_URL:
        cache = EmbeddingCache(config.EMBEDDING_CACHE_URL, config.EMBEDDING_CACHE_TTL_SECONDS)
        try:
            cache.connect()
        except RedisError as e:
            logger.warning(f"Embedding cache unavailable, continuing without it: {e}")
            cache = None

    return RemoteEmbeddingProvider(
        endpoint=config.EMBEDDING_ENDPOINT,
        timeout_seconds=config.EMBEDDING_TIMEOUT_SECONDS,
        max_retries=config.EMBEDDING_MAX_RETRIES,
        dimension=config.EMBEDDING_DIMENSION,
        breaker=CircuitBreaker(
            config.EMBEDDING_ENDPOINT,
            failure_threshold=config.CIRCUIT_BREAKER_FAILURE_THRESHOLD,
            timeout_seconds=config.CIRCUIT_BREAKER_TIMEOUT_SECONDS,
        ),
        cache=cache,
    )
