"""HTTP facade over the conversational engine.

Endpoints:
    POST /sessions                      -> 201 {session_id}
    POST /sessions/{id}/utterances      -> {reply, intent, state, products, debug}
    GET  /sessions/{id}                 -> full transcript
    GET  /products/{id}                 -> product record
    GET  /healthz                       -> liveness

Errors are {code, message}: 404 unknown session/product, 409 closed session,
422 malformed body. Configuration comes from an optional JSON file with
environment-variable overrides (CONVSHOP_* / PARAPHRASE_ENDPOINT).
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .catalog import Catalog, TfIdfIndex, generate_synthetic_catalog
from .runtime import BACKENDS, BackendUnavailable, Engine, EngineConfig, SessionClosed


@dataclass
class ServiceConfig:
    catalog_path: str | None = None
    index_path: str | None = None
    checkpoint_path: str | None = None
    host: str = "127.0.0.1"
    port: int = 8000
    backend: str = "rule"
    push_threshold: int = 50
    debug: bool = False
    paraphrase_endpoint: str = ""

    @classmethod
    def load(cls, path: str | None = None, env: dict | None = None) -> "ServiceConfig":
        """JSON config file, then environment overrides."""
        data: dict = {}
        if path:
            with open(path) as fh:
                data = json.load(fh)
        cfg = cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})
        env = os.environ if env is None else env
        mapping = {
            "CONVSHOP_CATALOG": ("catalog_path", str),
            "CONVSHOP_INDEX": ("index_path", str),
            "CONVSHOP_CHECKPOINT": ("checkpoint_path", str),
            "CONVSHOP_HOST": ("host", str),
            "CONVSHOP_PORT": ("port", int),
            "CONVSHOP_BACKEND": ("backend", str),
            "CONVSHOP_PUSH_THRESHOLD": ("push_threshold", int),
            "CONVSHOP_DEBUG": ("debug", lambda v: v not in ("", "0", "false")),
            "PARAPHRASE_ENDPOINT": ("paraphrase_endpoint", str),
        }
        for var, (attr, cast) in mapping.items():
            if var in env:
                setattr(cfg, attr, cast(env[var]))
        return cfg


def build_engine(config: ServiceConfig) -> Engine:
    if config.catalog_path:
        catalog = Catalog.load(config.catalog_path)
    else:
        catalog = generate_synthetic_catalog(400, vacancy_ratio=0.3, seed=0)
    index = TfIdfIndex.load(config.index_path) if config.index_path else None
    model = None
    if config.checkpoint_path:
        from .model.core import ModelParams

        model = ModelParams.load(config.checkpoint_path)
    return Engine(
        catalog,
        index=index,
        model=model,
        config=EngineConfig(
            backend=config.backend,
            push_threshold=config.push_threshold,
            debug=config.debug,
        ),
    )


class SessionRequest(BaseModel):
    backend: str | None = None


class UtteranceRequest(BaseModel):
    text: str


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="convshop")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.engine = engine
    # one lock per session: catalog/index/model are read-only shared, but a
    # single session must process one utterance at a time
    locks: dict[str, threading.Lock] = {}

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return _error(422, "malformed_request", str(exc.errors()[:1]))

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "products": len(engine.catalog)}

    @app.post("/sessions", status_code=201)
    def open_session(body: SessionRequest | None = None):
        backend = body.backend if body else None
        if backend is not None and backend not in BACKENDS:
            return _error(422, "unknown_backend",
                          f"backend must be one of {', '.join(BACKENDS)}")
        try:
            session = engine.open_session(backend)
        except BackendUnavailable as exc:
            return _error(422, "backend_unavailable", str(exc))
        locks[session.id] = threading.Lock()
        return {"session_id": session.id, "backend": session.backend,
                "greeting": session.turns[0]["text"]}

    def _session_or_none(session_id: str):
        return engine.sessions.get(session_id)

    @app.post("/sessions/{session_id}/utterances")
    def utterance(session_id: str, body: UtteranceRequest):
        session = _session_or_none(session_id)
        if session is None:
            return _error(404, "unknown_session", f"no session {session_id!r}")
        if not body.text.strip():
            return _error(422, "empty_text", "utterance text is empty")
        lock = locks.setdefault(session_id, threading.Lock())
        with lock:
            try:
                sys_turn = engine.step_session(session, body.text)
            except SessionClosed as exc:
                return _error(409, "session_closed", str(exc))
        products = [
            {
                "id": pid,
                "profile": engine.catalog[pid].profile,
                "position": i + 1,
            }
            for i, pid in enumerate(sys_turn.get("items", []))
        ]
        user_turn = session.turns[-2]
        return {
            "reply": sys_turn["text"],
            "reply_intent": sys_turn["intent"],
            "intent": user_turn["intent"],
            "state": user_turn["state"],
            "products": products,
            "status": session.status,
            "debug": sys_turn.get("debug"),
        }

    @app.get("/sessions/{session_id}")
    def transcript(session_id: str):
        session = _session_or_none(session_id)
        if session is None:
            return _error(404, "unknown_session", f"no session {session_id!r}")
        return {
            "session_id": session.id,
            "status": session.status,
            "backend": session.backend,
            "turns": session.turns,
            "purchased_id": session.purchased_id,
        }

    @app.get("/products/{product_id}")
    def product(product_id: str):
        if product_id not in engine.catalog:
            return _error(404, "unknown_product", f"no product {product_id!r}")
        p = engine.catalog[product_id]
        return {"id": p.id, "profile": p.profile, "attributes": p.attributes}

    return app


def serve(config: ServiceConfig) -> None:
    """Build the engine and run the server (blocking)."""
    import uvicorn

    app = create_app(build_engine(config))
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
