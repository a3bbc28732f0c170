"""HTTP annotation service.

Thin JSON layer over the session store: every endpoint delegates to the loop
and analysis operations, translating domain errors to HTTP statuses (404
unknown ids, 409 protocol violations with a machine-readable list, 403 for a
report requested before finalization).
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.responses import FileResponse, JSONResponse, RedirectResponse
from fastapi.staticfiles import StaticFiles

from .. import active_loop as loop
from ..active_loop import LoopConfig, ProtocolError, Session, SessionState, StateError, UserProfile, VoteIntent
from ..analysis import build_report
from ..committee import load_committee
from ..core import Quadrant
from ..features import load_pool
from .schemas import (
    ApiSessionView,
    CreateSessionRequest,
    PendingItem,
    PoolInfo,
    SubmitAnnotationsRequest,
)
from .state import SessionStore, UnknownPoolError, UnknownSessionError

log = logging.getLogger("emoloop.service")


@dataclass
class ServiceConfig:
    port: int = 8075
    data_dir: str = "data"
    pools_dir: str = "pools"
    committee_dir: str = "committee"
    async_retrain: bool = False
    ui_dir: Optional[str] = None

    @classmethod
    def from_file(cls, path: Optional[str | Path] = None) -> "ServiceConfig":
        """Read the JSON config file, then apply EMOLOOP_* environment overrides."""
        raw = {}
        if path is not None:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        cfg = cls(**raw)
        env = os.environ
        if "EMOLOOP_PORT" in env:
            cfg.port = int(env["EMOLOOP_PORT"])
        if "EMOLOOP_DATA_DIR" in env:
            cfg.data_dir = env["EMOLOOP_DATA_DIR"]
        if "EMOLOOP_POOLS_DIR" in env:
            cfg.pools_dir = env["EMOLOOP_POOLS_DIR"]
        if "EMOLOOP_COMMITTEE_DIR" in env:
            cfg.committee_dir = env["EMOLOOP_COMMITTEE_DIR"]
        if "EMOLOOP_ASYNC_RETRAIN" in env:
            cfg.async_retrain = env["EMOLOOP_ASYNC_RETRAIN"] == "1"
        if "EMOLOOP_UI_DIR" in env:
            cfg.ui_dir = env["EMOLOOP_UI_DIR"]
        return cfg


def discover_pools(pools_dir: str | Path) -> dict[str, list]:
    """Each subdirectory holding a manifest.json is one selectable pool."""
    pools = {}
    root = Path(pools_dir)
    if not root.exists():
        return pools
    for child in sorted(root.iterdir()):
        if (child / "manifest.json").exists():
            pools[child.name] = load_pool(child)
    return pools


def session_view(session: Session, store: SessionStore) -> ApiSessionView:
    retraining = store.is_retraining(session.session_id)
    pending = []
    if not retraining:
        for eid in session.pending:
            ex = session.excerpt(eid)
            pending.append(PendingItem(excerpt_id=ex.id, title=ex.title, audio_uri=ex.audio_uri))
    return ApiSessionView(
        session_id=session.session_id,
        state="Retraining" if retraining else session.state.value,
        iteration=session.iteration,
        max_iterations=session.config.max_iterations,
        batch_size=session.config.batch_size,
        pool_size=len(session.pool),
        annotations_count=len(session.annotations),
        pending_batch=pending,
    )


def create_app(config: Optional[ServiceConfig] = None) -> FastAPI:
    config = config or ServiceConfig.from_file()
    pools = discover_pools(config.pools_dir)
    committee = load_committee(config.committee_dir)
    store = SessionStore(
        data_dir=config.data_dir,
        pools=pools,
        committee=committee,
        async_retrain=config.async_retrain,
    )
    app = FastAPI(title="emoloop annotation service")
    app.state.store = store
    app.state.config = config

    @app.middleware("http")
    async def request_logging(request: Request, call_next):
        started = time.perf_counter()
        response = await call_next(request)
        log.info(
            "%s %s -> %d (%.1f ms)",
            request.method,
            request.url.path,
            response.status_code,
            1000 * (time.perf_counter() - started),
        )
        return response

    @app.exception_handler(ProtocolError)
    async def protocol_error_handler(_request: Request, exc: ProtocolError):
        return JSONResponse(
            status_code=409,
            content={"detail": str(exc), "violations": exc.violations},
        )

    @app.exception_handler(StateError)
    async def state_error_handler(_request: Request, exc: StateError):
        return JSONResponse(
            status_code=409,
            content={
                "detail": str(exc),
                "violations": [{"code": "state", "excerpt_ids": [], "detail": str(exc)}],
            },
        )

    @app.post("/api/sessions", response_model=ApiSessionView, status_code=201)
    def create_session(body: CreateSessionRequest):
        profile = UserProfile(
            display_name=body.user_profile.display_name,
            political_view=body.user_profile.political_view,
            vote_intent=VoteIntent(body.user_profile.vote_intent),
        )
        loop_config = (
            LoopConfig(**body.config.model_dump()) if body.config else LoopConfig()
        )
        try:
            session = store.create_session(profile, body.pool_id, loop_config)
        except UnknownPoolError:
            raise HTTPException(status_code=404, detail=f"unknown pool {body.pool_id!r}")
        return session_view(session, store)

    @app.get("/api/sessions/{session_id}", response_model=ApiSessionView)
    def get_session(session_id: str):
        try:
            session = store.get(session_id)
        except UnknownSessionError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return session_view(session, store)

    @app.post("/api/sessions/{session_id}/annotations", response_model=ApiSessionView)
    def submit_annotations(session_id: str, body: SubmitAnnotationsRequest):
        try:
            labels = [(item.excerpt_id, Quadrant(item.quadrant)) for item in body.labels]
            session = store.submit(session_id, labels)
        except UnknownSessionError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return session_view(session, store)

    @app.get("/api/sessions/{session_id}/report")
    def get_report(session_id: str, top_k: int = 10):
        try:
            session = store.get(session_id)
        except UnknownSessionError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        if session.state is not SessionState.FINALIZED:
            raise HTTPException(
                status_code=403,
                detail=f"report available after finalization; state is {session.state.value}",
            )
        report = build_report(loop.finalize(session), top_k=top_k)
        return report.to_json_dict()

    @app.get("/api/pools", response_model=list[PoolInfo])
    def list_pools():
        return [PoolInfo(pool_id=pid, size=len(pool)) for pid, pool in sorted(pools.items())]

    @app.get("/api/excerpts/{excerpt_id}/audio")
    def get_audio(excerpt_id: str):
        ex = store.find_excerpt(excerpt_id)
        if ex is None:
            raise HTTPException(status_code=404, detail=f"unknown excerpt {excerpt_id!r}")
        if not ex.audio_uri:
            raise HTTPException(status_code=404, detail=f"excerpt {excerpt_id!r} has no audio")
        if ex.audio_uri.startswith("http://") or ex.audio_uri.startswith("https://"):
            return RedirectResponse(ex.audio_uri)
        path = Path(config.pools_dir) / ex.audio_uri
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"audio file missing for {excerpt_id!r}")
        return FileResponse(path)

    if config.ui_dir and Path(config.ui_dir).exists():
        app.mount("/ui", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app
