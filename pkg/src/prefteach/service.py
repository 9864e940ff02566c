"""HTTP surface for live teaching sessions.

Synchronous request/response: the agent loop is bounded, so each utterance
completes within one POST.  Session state is in-memory with idle eviction;
only the preference KB is durable.
"""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .kb import PreferenceKB
from .manager import PhaseError, Phase, SessionState, handle_utterance, open_session, transcript_record
from .models import ModelBundle
from .types import DomainSchema, load_schema


@dataclass
class ServiceConfig:
    schema_path: str
    bundle_path: str
    kb_path: str
    host: str = "127.0.0.1"
    port: int = 8080
    max_sessions: int = 256
    idle_timeout_s: float = 1800.0
    seed: int = 0
    static_dir: Optional[str] = None  # optional chat UI asset bundle


class CreateSessionBody(BaseModel):
    user_id: str


class UtteranceBody(BaseModel):
    text: str


class ResetBody(BaseModel):
    confirm: bool


@dataclass
class _Entry:
    session: SessionState
    last_active: float = field(default_factory=time.monotonic)


def step_payload(step) -> dict:
    out = {
        "kind": step.action.kind.value,
        "name": step.action.name,
        "confidence": round(float(step.confidence), 6),
    }
    if step.text is not None:
        out["text"] = step.text
    return out


def create_app(
    schema: DomainSchema,
    bundle,
    kb: PreferenceKB,
    config: Optional[ServiceConfig] = None,
) -> FastAPI:
    if hasattr(bundle, "check_schema"):
        bundle.check_schema(schema)
    app = FastAPI(title="preference teaching service")
    sessions: dict[str, _Entry] = {}
    registry_lock = threading.Lock()
    seed_counter = [config.seed if config else 0]
    idle_timeout = config.idle_timeout_s if config else 1800.0
    max_sessions = config.max_sessions if config else 256

    @app.exception_handler(RequestValidationError)
    async def malformed_body(_request: Request, _exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "malformed body"})

    def evict_idle() -> None:
        now = time.monotonic()
        doomed = [sid for sid, e in sessions.items() if now - e.last_active > idle_timeout]
        for sid in doomed:
            if sessions[sid].session.phase is not Phase.AGENT_ACTING:
                del sessions[sid]

    @app.get("/api/health")
    def health():
        return {"status": "ok", "sessions": len(sessions)}

    @app.post("/api/session")
    def create_session(body: CreateSessionBody):
        with registry_lock:
            evict_idle()
            if len(sessions) >= max_sessions:
                return JSONResponse(status_code=503, content={"error": "session limit reached"})
            seed_counter[0] += 1
            session = open_session(body.user_id, seed=seed_counter[0])
            sessions[session.session_id] = _Entry(session=session)
        return {"session_id": session.session_id, "user_id": body.user_id, "phase": session.phase.value}

    @app.post("/api/session/{session_id}/utterance")
    def utterance(session_id: str, body: UtteranceBody):
        entry = sessions.get(session_id)
        if entry is None:
            return JSONResponse(status_code=404, content={"error": "unknown session"})
        if not entry.session.lock.acquire(blocking=False):
            return JSONResponse(status_code=409, content={"error": "session busy"})
        try:
            entry.last_active = time.monotonic()
            try:
                steps = handle_utterance(entry.session, body.text, bundle, schema, kb)
            except PhaseError:
                return JSONResponse(
                    status_code=409,
                    content={"error": f"session in phase {entry.session.phase.value}"},
                )
            return {
                "agent_steps": [step_payload(s) for s in steps],
                "phase": entry.session.phase.value,
            }
        finally:
            entry.session.lock.release()

    @app.get("/api/session/{session_id}")
    def transcript(session_id: str):
        entry = sessions.get(session_id)
        if entry is None:
            return JSONResponse(status_code=404, content={"error": "unknown session"})
        record = transcript_record(entry.session)
        return {
            "session_id": session_id,
            "user_id": entry.session.user_id,
            "phase": entry.session.phase.value,
            "transcript": record,
        }

    @app.get("/api/preferences/{user_id}")
    def preferences(user_id: str):
        return [r.to_json() for r in kb.retrieve_kb(user_id)]

    @app.post("/api/preferences/{user_id}/reset")
    def reset(user_id: str, body: ResetBody):
        if not body.confirm:
            return JSONResponse(status_code=400, content={"error": "confirm must be true"})
        from .kb import delete_all

        applied = kb.update_kb(user_id, [delete_all()])
        return {"deleted": applied}

    if config and config.static_dir and Path(config.static_dir).is_dir():
        from starlette.staticfiles import StaticFiles

        # mounted last so /api/* routes win; html=True serves index.html at /
        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app


def load_service(config: ServiceConfig) -> FastAPI:
    schema = load_schema(config.schema_path)
    bundle = ModelBundle.load(config.bundle_path)
    kb = PreferenceKB(config.kb_path, entity_types=schema.entity_types)
    return create_app(schema, bundle, kb, config)


def serve(config: ServiceConfig) -> None:
    import uvicorn

    app = load_service(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
