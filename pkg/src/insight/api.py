"""HTTP surface over the session service.

Questions are accepted with 202 and run on a background thread; clients
follow the turn either by polling the turn endpoint or by requesting it
with ``?stream=1``, which serves server-sent events carrying each stage
transition until the turn reaches a terminal status.
"""

from __future__ import annotations

import asyncio
import json
import logging
import threading
from typing import Any

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from pydantic import BaseModel, Field

from .errors import (
    ConnectionFailed,
    EmptyInput,
    IndexOutOfRange,
    InsightError,
    NameConflict,
    SessionBusy,
    UnknownDataset,
    UnknownModel,
    UnknownSession,
    UnknownTurn,
)
from .service import InsightService

logger = logging.getLogger(__name__)

_STATUS_BY_ERROR: tuple[tuple[type[Exception], int], ...] = (
    (UnknownDataset, 404),
    (UnknownSession, 404),
    (UnknownTurn, 404),
    (UnknownModel, 400),
    (NameConflict, 409),
    (SessionBusy, 409),
    (IndexOutOfRange, 400),
    (ConnectionFailed, 400),
    (EmptyInput, 400),
)


def _http_status(exc: Exception) -> int:
    for err_type, status in _STATUS_BY_ERROR:
        if isinstance(exc, err_type):
            return status
    return 500


class RegisterDatasetBody(BaseModel):
    name: str = Field(min_length=1)
    connection: str = Field(min_length=1)


class CreateSessionBody(BaseModel):
    dataset: str = Field(min_length=1)
    model_id: str | None = None


class QuestionBody(BaseModel):
    text: str = Field(min_length=1)


class SetModelBody(BaseModel):
    model_id: str = Field(min_length=1)


class ConfirmBody(BaseModel):
    approve: bool = True


class BookmarkBody(BaseModel):
    turn_id: str = Field(min_length=1)
    sub_task_index: int = 0
    label: str = ""


class CompareBody(BaseModel):
    bookmark_ids: list[str] = Field(min_length=1)


API_DESCRIPTION = """\
Endpoints
=========
POST /datasets                      register a database {name, connection}
GET  /datasets                      list registered datasets
POST /sessions                      open a session {dataset, model_id?}
GET  /sessions/{id}                 session with its turns
POST /sessions/{id}/questions       ask a question {text}; returns 202 + turn id
GET  /sessions/{id}/turns/{tid}     turn snapshot; add ?stream=1 for SSE updates
POST /sessions/{id}/turns/{tid}/confirm  approve or cancel a paused turn {approve}
POST /sessions/{id}/model           switch the session's model {model_id}
POST /bookmarks                     save a result {turn_id, sub_task_index, label}
GET  /bookmarks?session={id}        bookmarks of a session
POST /bookmarks/compare             side-by-side payload {bookmark_ids}
GET  /config                        active configuration (credentials excluded)
GET  /health                        liveness probe
"""


def create_app(service: InsightService) -> FastAPI:
    app = FastAPI(title="insight", docs_url=None, redoc_url=None)
    app.state.service = service

    @app.exception_handler(InsightError)
    async def _insight_error(request: Request, exc: InsightError):
        return JSONResponse(
            status_code=_http_status(exc),
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/health")
    async def health() -> dict[str, str]:
        return {"status": "ok"}

    @app.get("/api-docs", response_class=PlainTextResponse)
    async def api_docs() -> str:
        return API_DESCRIPTION

    @app.get("/config")
    async def get_config() -> dict[str, Any]:
        cfg = service.config
        return {
            "models": cfg.gateway.models,
            "default_model": cfg.gateway.default_model,
            "embed_dimension": cfg.gateway.embed_dimension,
            "cassette_mode": cfg.cassette_mode if cfg.cassette_path else "off",
            "require_confirmation": cfg.require_confirmation,
            "pipeline": {
                name: getattr(cfg.pipeline, name)
                for name in cfg.pipeline.__dataclass_fields__
            },
        }

    @app.post("/datasets", status_code=201)
    async def register_dataset(body: RegisterDatasetBody) -> dict[str, Any]:
        return await asyncio.to_thread(
            service.register_dataset, body.connection, body.name
        )

    @app.get("/datasets")
    async def list_datasets() -> list[dict[str, Any]]:
        return await asyncio.to_thread(service.list_datasets)

    @app.post("/sessions", status_code=201)
    async def create_session(body: CreateSessionBody) -> dict[str, Any]:
        return await asyncio.to_thread(
            service.create_session, body.dataset, body.model_id
        )

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str) -> dict[str, Any]:
        return await asyncio.to_thread(service.session_state, session_id)

    @app.post("/sessions/{session_id}/questions", status_code=202)
    async def post_question(session_id: str, body: QuestionBody) -> dict[str, Any]:
        turn_id = await asyncio.to_thread(
            _start_turn_thread, service, session_id, body.text
        )
        return {"turn_id": turn_id, "status": "running"}

    @app.get("/sessions/{session_id}/turns/{turn_id}")
    async def get_turn(
        session_id: str, turn_id: str, stream: int = Query(default=0)
    ) -> Any:
        if stream:
            return StreamingResponse(
                _turn_event_stream(service, session_id, turn_id),
                media_type="text/event-stream",
            )
        return await asyncio.to_thread(service.get_turn, session_id, turn_id)

    @app.post("/sessions/{session_id}/turns/{turn_id}/confirm")
    async def confirm_turn(
        session_id: str, turn_id: str, body: ConfirmBody
    ) -> dict[str, Any]:
        # Membership check first so a foreign turn id 404s.
        await asyncio.to_thread(service.get_turn, session_id, turn_id)
        return await asyncio.to_thread(service.confirm_turn, turn_id, body.approve)

    @app.post("/sessions/{session_id}/model")
    async def set_model(session_id: str, body: SetModelBody) -> dict[str, Any]:
        return await asyncio.to_thread(service.set_model, session_id, body.model_id)

    @app.post("/bookmarks", status_code=201)
    async def add_bookmark(body: BookmarkBody) -> dict[str, Any]:
        return await asyncio.to_thread(
            service.add_bookmark, body.turn_id, body.sub_task_index, body.label
        )

    @app.get("/bookmarks")
    async def list_bookmarks(session: str = Query(min_length=1)) -> list[dict[str, Any]]:
        return await asyncio.to_thread(service.list_bookmarks, session)

    @app.post("/bookmarks/compare")
    async def compare(body: CompareBody) -> dict[str, Any]:
        panels = await asyncio.to_thread(service.compare, body.bookmark_ids)
        return {"panels": panels}

    return app


def _start_turn_thread(service: InsightService, session_id: str, text: str) -> str:
    """Persist the running turn synchronously so the response can
    reference it, then run the pipeline on a daemon thread."""
    turn_id = service.begin_turn(session_id, text)

    def run() -> None:
        try:
            service.execute_turn(turn_id)
        except Exception:  # noqa: BLE001 - thread boundary; turn row records failures
            logger.exception("turn %s thread crashed", turn_id)

    threading.Thread(target=run, daemon=True, name=f"turn-{turn_id}").start()
    return turn_id


async def _turn_event_stream(service: InsightService, session_id: str, turn_id: str):
    """Server-sent events: one ``stage`` event per new stage transition,
    a final ``turn`` event with the full terminal turn."""
    sent = 0
    while True:
        turn = await asyncio.to_thread(service.get_turn, session_id, turn_id)
        events = turn.get("stage_events", [])
        while sent < len(events):
            stage, ts = events[sent]
            sent += 1
            data = json.dumps({"stage": stage, "timestamp": ts, "status": turn["status"]})
            yield f"event: stage\ndata: {data}\n\n"
        if turn["status"] in ("done", "failed") or turn.get("awaiting_confirmation"):
            yield f"event: turn\ndata: {json.dumps(turn)}\n\n"
            return
        await asyncio.sleep(0.05)
