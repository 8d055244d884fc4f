from abc import ABC, abstractmethod
from typing import List, Sequence

from src.models.detection import EmbeddingVector


class EmbeddingProvider(ABC):
    """
    Turns span output text into vectors.

    Implementations must return the same vector for the same text within
    one instance and keep ``dimension`` fixed. They may be called from
    several worker threads at once.
    """

    name: str = "abstract"
    dimension: int = 0

    @abstractmethod
    def embed_many(self, texts: Sequence[str]) -> List[EmbeddingVector]:
        """Embed a batch; result order matches ``texts``."""

    def embed(self, text: str) -> EmbeddingVector:
        return self.embed_many([text])[0]

    def close(self) -> None:
        """Release network or cache resources, if any."""

    def describe(self) -> dict:
        return {"provider": self.name, "dimension": self.dimension}

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name}, dimension={self.dimension})"
