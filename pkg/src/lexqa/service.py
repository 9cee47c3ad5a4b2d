"""HTTP service over the engine.

Handlers hold no state and no logic beyond validation and serialization;
every response is derived from one engine call so the API and the
in-process modules can never disagree. Error bodies always use the shape
{code, message, detail} with code drawn from a fixed set:

    empty_question, invalid_k, invalid_request, invalid_decision,
    not_found, already_decided, all_providers_failed, selector_failure,
    internal
"""

from __future__ import annotations

import logging
from typing import Any

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from lexqa.engine import Engine
from lexqa.errors import (
    AllProvidersFailed,
    AlreadyDecided,
    EmptyText,
    EngineError,
    ItemNotFound,
    SelectorFailure,
)
from lexqa.review import Approve, Reject, ReviewItem, item_to_dict

logger = logging.getLogger(__name__)


def api_error(status: int, code: str, message: str, detail: Any = None) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "detail": detail},
    )


class QueryRequest(BaseModel):
    question: str


class SearchRequest(BaseModel):
    question: str
    k: int = 3


class DecisionRequest(BaseModel):
    decision: str
    reviewer_id: str
    reason: str | None = None


def _item_body(item: ReviewItem) -> dict[str, Any]:
    return item_to_dict(item)


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="lexqa", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return api_error(400, "invalid_request", "request body failed validation", exc.errors())

    @app.exception_handler(EngineError)
    async def on_engine_error(request: Request, exc: EngineError):
        if isinstance(exc, EmptyText):
            return api_error(400, "empty_question", str(exc))
        if isinstance(exc, ItemNotFound):
            return api_error(404, "not_found", str(exc))
        if isinstance(exc, AlreadyDecided):
            return api_error(409, "already_decided", str(exc))
        if isinstance(exc, AllProvidersFailed):
            return api_error(502, "all_providers_failed", str(exc))
        if isinstance(exc, SelectorFailure):
            return api_error(502, "selector_failure", str(exc))
        logger.exception("unhandled engine error")
        return api_error(500, "internal", str(exc))

    @app.post("/v1/query")
    def query(body: QueryRequest) -> dict[str, Any]:
        outcome, trace_id, _ = engine.answer(body.question)
        return {
            "answer": outcome.text,
            "path": outcome.path_name,
            "best_score": outcome.best_score(),
            "trace_id": trace_id,
        }

    @app.post("/v1/kb/search")
    def kb_search(body: SearchRequest):
        if body.k < 1:
            return api_error(400, "invalid_k", f"k must be >= 1, got {body.k}")
        return {"hits": engine.search_kb(body.question, body.k)}

    @app.get("/v1/review/queue")
    def review_queue() -> dict[str, Any]:
        return {"items": [_item_body(item) for item in engine.pending_items()]}

    @app.post("/v1/review/{item_id}/decision")
    def review_decision(item_id: int, body: DecisionRequest):
        if body.decision == "approve":
            decision = Approve()
        elif body.decision == "reject":
            if body.reason is None or not body.reason.strip():
                return api_error(400, "invalid_decision", "reject requires a non-empty reason")
            decision = Reject(reason=body.reason)
        else:
            return api_error(400, "invalid_decision", f"unknown decision {body.decision!r}")
        outcome = engine.decide_item(item_id, decision, body.reviewer_id)
        return {"status": outcome.status, "item_id": outcome.item_id, "entry_id": outcome.entry_id}

    @app.get("/v1/traces/{trace_id}")
    def get_trace(trace_id: str):
        record = engine.get_trace(trace_id)
        if record is None:
            return api_error(404, "not_found", f"no trace {trace_id}")
        return record

    @app.get("/v1/healthz")
    def healthz() -> dict[str, Any]:
        return engine.health()

    return app
