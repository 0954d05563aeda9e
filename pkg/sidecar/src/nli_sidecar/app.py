"""HTTP surface of the inference service.

POST /v1/nli      {"pairs": [[premise, hypothesis], ...]}
                  -> {"results": [{"entail", "contra", "neutral"}, ...], "model_id"}
POST /v1/quality  {"pairs": [[claim, context], ...]}
                  -> {"scores": [...], "model_id"}
GET  /healthz     -> {"status": "ok", "model_id"}

Results preserve request order; requests larger than the configured batch
size are chunked before hitting the model.  Malformed bodies get HTTP 400.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .backends import load_backend
from .config import SidecarConfig


class PairsBody(BaseModel):
    pairs: list[tuple[str, str]] = Field(default_factory=list)


def _chunks(items, size):
    for start in range(0, len(items), size):
        yield items[start : start + size]


def create_app(config: SidecarConfig | None = None, backend=None) -> FastAPI:
    config = config or SidecarConfig()
    backend = backend or load_backend(config)
    app = FastAPI(title="nli-sidecar", version="0.1.0")
    app.state.config = config
    app.state.backend = backend

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "model_id": backend.model_id}

    @app.post("/v1/nli")
    async def nli(body: PairsBody):
        results = []
        for chunk in _chunks(body.pairs, config.max_batch):
            for entail, contra, neutral in backend.nli(list(chunk)):
                results.append(
                    {"entail": entail, "contra": contra, "neutral": neutral}
                )
        return {"results": results, "model_id": backend.model_id}

    @app.post("/v1/quality")
    async def quality(body: PairsBody):
        scores = []
        for chunk in _chunks(body.pairs, config.max_batch):
            scores.extend(backend.quality(list(chunk)))
        return {"scores": scores, "model_id": backend.model_id}

    return app


def serve(config: SidecarConfig) -> None:
    """Run the service until interrupted; raises on startup failure."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
