"""
Reference embedding endpoint.

Serves the remote provider protocol on top of the builtin embedder so the
remote code path can be exercised end to end:

    POST /embed   {"texts": [...]}  ->  {"vectors": [[...], ...]}
    GET  /health

Run with ``uvicorn src.embedding_server:app``.
"""
import logging
from contextlib import asynccontextmanager
from typing import AsyncGenerator, List

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from src.config import settings
from src.models.errors import ParameterError
from src.providers.builtin import MIN_DIMENSION, builtin_embed

logger = logging.getLogger(__name__)

MAX_TEXTS_PER_REQUEST = 1024


class EmbedRequest(BaseModel):
    texts: List[str] = Field(..., max_length=MAX_TEXTS_PER_REQUEST)


class EmbedResponse(BaseModel):
    vectors: List[List[float]]
    dimension: int


def create_app(dimension: int = settings.EMBEDDING_DIMENSION) -> FastAPI:
    if dimension < MIN_DIMENSION:
        raise ParameterError(f"Embedding dimension must be >= {MIN_DIMENSION}, got {dimension}")

    @asynccontextmanager
    async def lifespan(app: FastAPI) -> AsyncGenerator[None, None]:
        logger.info(f"Embedding endpoint starting (builtin embedder, d={dimension})")
        yield
        logger.info(
            f"Embedding endpoint stopped after {app.state.requests_served} requests, "
            f"{app.state.texts_embedded} texts"
        )

    app = FastAPI(
        title=f"{settings.APP_NAME} embedding endpoint",
        version=settings.APP_VERSION,
        description="Builtin trigram embedder behind the remote provider protocol",
        lifespan=lifespan,
    )
    app.state.requests_served = 0
    app.state.texts_embedded = 0

    @app.get("/health", tags=["Health"])
    async def health_check() -> dict:
        return {"status": "healthy", "embedder": "builtin", "dimension": dimension}

    @app.post("/embed", response_model=EmbedResponse, tags=["Embeddings"])
    async def embed(payload: EmbedRequest, request: Request) -> EmbedResponse:
        try:
            vectors = [builtin_embed(text, dimension).values.tolist() for text in payload.texts]
        except Exception as e:
            logger.error(f"Embedding failed: {str(e)}", exc_info=True)
            raise HTTPException(status_code=500, detail="Embedding failed")
        request.app.state.requests_served += 1
        request.app.state.texts_embedded += len(payload.texts)
        return EmbedResponse(vectors=vectors, dimension=dimension)

    @app.exception_handler(Exception)
    async def global_exception_handler(request: Request, exc: Exception):
        logger.error(f"Unhandled exception: {str(exc)}", exc_info=True)
        return JSONResponse(
            status_code=500,
            content={"error": "Internal server error", "message": "An unexpected error occurred"}
        )

    return app


app = create_app()


if __name__ == "__main__":
    import uvicorn

    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    uvicorn.run("src.embedding_server:app", host="127.0.0.1", port=8080)
