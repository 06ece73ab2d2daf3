"""HTTP facade over a loaded engine: stateless, read-only, JSON in and out.

Responses are a pure function of (request, loaded indices) apart from the
measured latency field.  Validation failures and unknown models map to 400;
anything unexpected maps to 500 with an opaque id that also appears in the
server log, never a stack trace.
"""

from __future__ import annotations

import logging
import time
import uuid
from typing import Literal, Optional

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .engine import GhostEngine
from .ngram import StopPolicy

logger = logging.getLogger(__name__)


class StopSpec(BaseModel):
    kind: Literal["none", "max_words", "entropy"] = "none"
    t: int = Field(default=3, ge=1, le=10)
    threshold: float = Field(default=0.6, gt=0)

    def to_policy(self) -> StopPolicy:
        return StopPolicy(kind=self.kind, t=self.t, threshold=self.threshold)


class SuggestRequest(BaseModel):
    prefix: str = Field(min_length=1)
    context: list[str] = Field(default_factory=list)
    model: str = "mpc"
    rerank: bool = False
    stop: Optional[StopSpec] = None
    min_confidence: Optional[float] = None


def create_app(engine: GhostEngine) -> FastAPI:
    app = FastAPI(title="ghostline", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(RequestValidationError)
    async def malformed_body(_request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:3])})

    @app.exception_handler(Exception)
    async def internal_error(_request: Request, exc: Exception):
        error_id = uuid.uuid4().hex
        logger.exception("request failed (error_id=%s)", error_id, exc_info=exc)
        return JSONResponse(status_code=500, content={"error_id": error_id})

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "models": engine.models()}

    @app.get("/v1/models")
    def models():
        return {"models": engine.models(), "indices": engine.inventory()}

    @app.post("/v1/suggest")
    def suggest(req: SuggestRequest, topk: int = Query(default=0, ge=0, le=50)):
        if req.model not in engine.models():
            return JSONResponse(
                status_code=400,
                content={"error": f"unknown or unloaded model {req.model!r}"},
            )
        stop = req.stop.to_policy() if req.stop is not None else None
        start = time.perf_counter()
        suggestion = engine.suggest(
            req.prefix,
            context=tuple(req.context),
            model=req.model,
            use_rerank=req.rerank,
            stop=stop,
            min_confidence=req.min_confidence,
        )
        latency_us = int((time.perf_counter() - start) * 1e6)
        body = {
            "suggestion": suggestion.text,
            "confidence": None if suggestion.is_abstention else suggestion.score,
            "source": suggestion.source,
            "latency_us": latency_us,
        }
        if topk:
            cands, source = engine.candidates(req.prefix, model=req.model, k=topk, stop=stop)
            if req.rerank and engine.tfidf is not None:
                from .rerank import rerank as rerank_fn

                cands = rerank_fn(cands, req.prefix, tuple(req.context), engine.tfidf)
                source = "RERANKED"
            body["candidates"] = [
                {"text": text, "score": score, "source": source} for text, score in cands
            ]
        return body

    return app


def run_service(index_paths: list[str], bind: str = "127.0.0.1:8040") -> None:
    """Load indices, then serve until interrupted."""
    import uvicorn

    engine = GhostEngine.load(index_paths)
    host, _, port = bind.rpartition(":")
    app = create_app(engine)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
