"""HTTP surface for live adaptive sessions.

States are 1-based on the wire (requests and responses); the engine is
0-based internally.  Sessions live in memory, one lock per session, so
any number of concurrent sessions can share the immutable fitted
networks without interference.  Error bodies are always
``{"code": ..., "message": ...}``.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from .inference import ImpossibleEvidenceError
from .network import Network
from .session import SessionError, TerminationRule, TestSession
from .zoo import TestBlueprint, blueprint_to_json


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


@dataclass
class SessionEntry:
    session_id: str
    model_id: str
    session: TestSession
    created: float
    last_access: float
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    """Thread-safe in-memory session registry with optional expiry."""

    def __init__(self, ttl_seconds: float | None = None):
        self._entries: dict[str, SessionEntry] = {}
        self._lock = threading.Lock()
        self.ttl = ttl_seconds

    def create(self, model_id: str, session: TestSession) -> SessionEntry:
        entry = SessionEntry(
            session_id=uuid.uuid4().hex,
            model_id=model_id,
            session=session,
            created=time.monotonic(),
            last_access=time.monotonic(),
        )
        with self._lock:
            self._entries[entry.session_id] = entry
        return entry

    def get(self, session_id: str) -> SessionEntry:
        with self._lock:
            entry = self._entries.get(session_id)
            if entry is None:
                raise ApiError(404, "unknown_session", f"no session {session_id!r}")
            if self.ttl is not None and time.monotonic() - entry.last_access > self.ttl:
                del self._entries[session_id]
                raise ApiError(404, "session_expired", f"session {session_id!r} expired")
            entry.last_access = time.monotonic()
            return entry

    def delete(self, session_id: str) -> None:
        with self._lock:
            if session_id not in self._entries:
                raise ApiError(404, "unknown_session", f"no session {session_id!r}")
            del self._entries[session_id]

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


class CreateSessionBody(BaseModel):
    model: str
    info_evidence: dict[str, int] = {}


class AnswerBody(BaseModel):
    question: str
    state: int


def _posteriors(session: TestSession) -> dict[str, list[float]]:
    return {
        d.variable: [float(p) for p in d.probabilities]
        for d in session.skill_estimates()
    }


def create_app(
    models: dict[str, Network],
    blueprint: TestBlueprint,
    session_log: Path | None = None,
    session_ttl: float | None = None,
) -> FastAPI:
    """Build the service around a registry of fitted networks."""
    app = FastAPI(title="catbn", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = SessionStore(ttl_seconds=session_ttl)
    app.state.store = store
    log_lock = threading.Lock()

    def log_event(event: dict) -> None:
        if session_log is None:
            return
        with log_lock:
            with open(session_log, "a") as fh:
                fh.write(json.dumps(event) + "\n")

    @app.exception_handler(ApiError)
    async def on_api_error(request: Request, err: ApiError):
        return JSONResponse(
            status_code=err.status, content={"code": err.code, "message": err.message}
        )

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, err: RequestValidationError):
        return JSONResponse(
            status_code=422, content={"code": "invalid_request", "message": str(err.errors())}
        )

    @app.get("/health")
    def health():
        return {"status": "ok", "models": sorted(models), "sessions": len(store)}

    @app.get("/models")
    def list_models():
        out = []
        for mid in sorted(models):
            net = models[mid]
            out.append(
                {
                    "id": mid,
                    "questions": len(net.question_ids),
                    "skills": list(net.skill_ids),
                    "info_vars": list(net.info_ids),
                }
            )
        return {"models": out}

    @app.get("/blueprint")
    def get_blueprint():
        return blueprint_to_json(blueprint)

    def question_payload(net: Network, qid: str) -> dict:
        var = net.var(qid)
        return {
            "id": qid,
            "text": var.name,
            "states": list(var.state_labels),
            "scale": var.scale,
        }

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        net = models.get(body.model)
        if net is None:
            raise ApiError(404, "unknown_model", f"no fitted model {body.model!r}")
        evidence = {}
        for var, state in body.info_evidence.items():
            if var not in net:
                raise ApiError(422, "unknown_variable", f"no variable {var!r}")
            card = net.cardinality(var)
            if not (1 <= state <= card):
                raise ApiError(
                    422, "invalid_state", f"{var}: state {state} out of range 1..{card}"
                )
            evidence[var] = state - 1
        try:
            session = TestSession(net, evidence, rule=TerminationRule.exhaust())
        except ImpossibleEvidenceError as err:
            raise ApiError(422, "impossible_evidence", str(err)) from err
        entry = store.create(body.model, session)
        first = session.select_next()
        log_event({"event": "create", "session_id": entry.session_id, "model": body.model})
        return {
            "session_id": entry.session_id,
            "model": body.model,
            "first_question": question_payload(net, first) if first else None,
            "entropy": session.current_entropy,
            "skill_posteriors": _posteriors(session),
        }

    @app.get("/sessions/{session_id}/next")
    def next_question(session_id: str):
        entry = store.get(session_id)
        with entry.lock:
            q = entry.session.select_next()
            if q is None:
                return {"done": True}
            return {
                "done": False,
                "question": question_payload(entry.session.net, q),
                "ig": entry.session.information_gain(q),
                "step": entry.session.step,
            }

    @app.post("/sessions/{session_id}/answers")
    def submit_answer(session_id: str, body: AnswerBody):
        entry = store.get(session_id)
        with entry.lock:
            session = entry.session
            net = session.net
            if body.question not in net:
                raise ApiError(422, "unknown_question", f"no variable {body.question!r}")
            card = net.cardinality(body.question)
            if not (1 <= body.state <= card):
                raise ApiError(
                    422,
                    "invalid_state",
                    f"{body.question}: state {body.state} out of range 1..{card}",
                )
            if body.question in session.evidence:
                raise ApiError(
                    409, "duplicate_answer", f"{body.question!r} was already answered"
                )
            try:
                session.submit_answer(body.question, body.state - 1)
            except ImpossibleEvidenceError as err:
                raise ApiError(422, "impossible_evidence", str(err)) from err
            except SessionError as err:
                raise ApiError(422, "invalid_answer", str(err)) from err
            record = session.transcript[-1].to_json_dict()
            log_event({"event": "answer", "session_id": session_id, **record})
            return {
                "step": session.step,
                "entropy": session.current_entropy,
                "skill_posteriors": _posteriors(session),
                "remaining": len(session.remaining),
            }

    @app.get("/sessions/{session_id}/estimates")
    def estimates(session_id: str):
        entry = store.get(session_id)
        with entry.lock:
            session = entry.session
            predicted = {
                q: {
                    "state": pred.state + 1,
                    "probabilities": [float(p) for p in pred.distribution.probabilities],
                    "tie": pred.tie,
                }
                for q, pred in session.predict_answers().items()
            }
            return {
                "step": session.step,
                "entropy": session.current_entropy,
                "entropy_trace": list(session.entropy_trace),
                "skill_posteriors": _posteriors(session),
                "predicted": predicted,
            }

    @app.get("/sessions/{session_id}/transcript")
    def transcript(session_id: str):
        entry = store.get(session_id)
        with entry.lock:
            return {
                "session_id": session_id,
                "model": entry.model_id,
                "records": [r.to_json_dict() for r in entry.session.transcript],
            }

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        store.delete(session_id)
        log_event({"event": "delete", "session_id": session_id})
        return Response(status_code=204)

    return app
