"""REST + server-push API for interactive teleoperation sessions."""

from __future__ import annotations

import asyncio
import json
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse
from pydantic import BaseModel, Field

from ..switching import StrategyKind, WrongStrategy
from ..tasks import TASK_NAMES, UnknownTask
from .session import SessionClosed, SessionManager, SessionRequest, UnknownSession

HEARTBEAT_S = 1.0


class CreateSessionBody(BaseModel):
    task: str
    strategy: str = "lams"
    layout_seed: int = 1
    backend: str = "mock"
    mock_script: str = ""
    backend_delay_s: float = 0.0
    tick_duration: float = Field(default=0.1, gt=0)
    pause_threshold: float = Field(default=1.5, gt=0)
    endpoint: str = ""
    model: str = ""


class InputBody(BaseModel):
    lateral: float = 0.0
    longitudinal: float = 0.0


class ManualSwitchBody(BaseModel):
    slot: str  # up | down | left | right


def create_app(log_dir: str | Path | None = None,
               state_dir: str | Path | None = None) -> FastAPI:
    manager = SessionManager(log_dir=log_dir, state_dir=state_dir)

    from contextlib import asynccontextmanager

    @asynccontextmanager
    async def lifespan(_app):
        yield
        manager.shutdown()

    app = FastAPI(title="teleop mode-switching service", lifespan=lifespan)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])
    app.state.manager = manager

    def get_session(session_id: str):
        try:
            return manager.get(session_id)
        except UnknownSession:
            raise HTTPException(404, f"no session {session_id}")

    @app.get("/health")
    def health():
        return {"ok": True, "tasks": list(TASK_NAMES),
                "strategies": [s.value for s in StrategyKind]}

    @app.post("/sessions")
    async def create_session(body: CreateSessionBody):
        if body.strategy not in {s.value for s in StrategyKind}:
            raise HTTPException(422, f"unknown strategy {body.strategy!r}")
        try:
            session = manager.create(SessionRequest(**body.model_dump()),
                                     asyncio.get_running_loop())
        except UnknownTask as exc:
            raise HTTPException(422, f"unknown task {exc}")
        except ValueError as exc:
            raise HTTPException(422, str(exc))
        return {"session_id": session.id, "frame": session.frame()}

    @app.get("/sessions/{session_id}/state")
    def state(session_id: str):
        return get_session(session_id).frame()

    @app.post("/sessions/{session_id}/input")
    def submit_input(session_id: str, body: InputBody):
        try:
            get_session(session_id).submit_input(body.lateral, body.longitudinal)
        except SessionClosed:
            raise HTTPException(409, "session closed")
        return {"ok": True}

    @app.post("/sessions/{session_id}/manual_switch")
    def manual_switch(session_id: str, body: ManualSwitchBody):
        if body.slot not in ("up", "down", "left", "right"):
            raise HTTPException(422, f"invalid slot {body.slot!r}")
        try:
            get_session(session_id).submit_manual_switch(body.slot)
        except WrongStrategy as exc:
            raise HTTPException(409, str(exc))
        except SessionClosed:
            raise HTTPException(409, "session closed")
        return {"ok": True}

    @app.post("/sessions/{session_id}/grouped_cycle")
    def grouped_cycle(session_id: str):
        try:
            get_session(session_id).submit_grouped_cycle()
        except WrongStrategy as exc:
            raise HTTPException(409, str(exc))
        except SessionClosed:
            raise HTTPException(409, "session closed")
        return {"ok": True}

    @app.get("/sessions/{session_id}/learning")
    def learning(session_id: str):
        return get_session(session_id).learning_view()

    @app.post("/sessions/{session_id}/end")
    def end(session_id: str):
        get_session(session_id)
        manager.end(session_id)
        return {"ok": True}

    @app.get("/sessions/{session_id}/stream")
    async def stream(session_id: str):
        session = get_session(session_id)
        queue = session.subscribe()

        async def frames():
            try:
                yield f"data: {json.dumps(session.frame())}\n\n"
                while True:
                    try:
                        frame = await asyncio.wait_for(queue.get(), timeout=HEARTBEAT_S)
                    except asyncio.TimeoutError:
                        yield ": heartbeat\n\n"
                        continue
                    if frame is None:
                        break
                    yield f"data: {json.dumps(frame)}\n\n"
            finally:
                session.unsubscribe(queue)

        return StreamingResponse(frames(), media_type="text/event-stream")

    return app
