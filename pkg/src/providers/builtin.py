"""
Deterministic character-trigram hashing embedder.

Text is lower-cased and whitespace runs collapse to one space; each
character 3-gram is hashed with 64-bit FNV-1a into ``hash mod d`` buckets
and the count vector is L2-normalised.
"""
import re
from functools import lru_cache
from typing import List, Sequence

import numpy as np

from src.models.detection import EmbeddingVector
from src.models.errors import ParameterError
from src.providers.base import EmbeddingProvider

FNV_OFFSET_BASIS = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK_64 = 0xFFFFFFFFFFFFFFFF

MIN_DIMENSION = 16
DEFAULT_DIMENSION = 256
NGRAM = 3

_WHITESPACE = re.compile(r"\s+")


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET_BASIS
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK_64
    return h


def normalize_text(text: str) -> str:
    return _WHITESPACE.sub(" ", text.lower())


def char_ngrams(text: str, n: int = NGRAM) -> List[str]:
    """All character n-grams; a non-empty text shorter than n is one gram."""
    if not text:
        return []
    if len(text) < n:
        return [text]
    return [text[i:i + n] for i in range(len(text) - n + 1)]


@lru_cache(maxsize=1 << 16)
def _gram_hash(gram: str) -> int:
    return fnv1a_64(gram.encode("utf-8"))


@lru_cache(maxsize=1 << 14)
def _embed_normalized(normalized: str, d: int) -> EmbeddingVector:
    grams = char_ngrams(normalized) if normalized.strip() else []
    if not grams:
        return EmbeddingVector(values=np.zeros(d))
    buckets = [_gram_hash(gram) % d for gram in grams]
    counts = np.bincount(buckets, minlength=d).astype(np.float64)
    return EmbeddingVector(values=counts / np.linalg.norm(counts))


def builtin_embed(text: str, d: int = DEFAULT_DIMENSION) -> EmbeddingVector:
    """
    Embed ``text`` into ``d`` dimensions.

    Empty or whitespace-only text gives the all-zero vector.

    Raises:
        ParameterError: if d < 16
    """
    if d < MIN_DIMENSION:
        raise ParameterError(f"Embedding dimension must be >= {MIN_DIMENSION}, got {d}")
    return _embed_normalized(normalize_text(text), d)


class BuiltinEmbeddingProvider(EmbeddingProvider):
    """In-process provider backed by builtin_embed."""

    name = "builtin"

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        if dimension < MIN_DIMENSION:
            raise ParameterError(f"Embedding dimension must be >= {MIN_DIMENSION}, got {dimension}")
        self.dimension = dimension

    def embed_many(self, texts: Sequence[str]) -> List[EmbeddingVector]:
        return [builtin_embed(text, self.dimension) for text in texts]
