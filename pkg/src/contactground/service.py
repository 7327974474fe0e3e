"""HTTP service: sessions, practice trials, and the operator console assets.

Endpoints are synchronous on purpose: FastAPI runs them in a worker pool and
the per-session locks serialize utterances in arrival order while distinct
sessions proceed concurrently.
"""
from __future__ import annotations

import json
from pathlib import Path

import uvicorn
from fastapi import FastAPI, Form, UploadFile
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import __version__
from .config import AppConfig, build_orchestrator
from .errors import (
    BudgetExhaustedError,
    ContactGroundError,
    FrameMismatchError,
    SessionError,
    UnknownSessionError,
)
from .prediction import PixelPoint
from .resolver import CameraExtrinsics, load_point_cloud
from .session import FrameBundle, Orchestrator
from .vision import ImageRef

__all__ = ["create_app", "serve"]


class UtteranceIn(BaseModel):
    text: str


def _error_handler(status: int):
    def handler(request, exc):
        return JSONResponse(status_code=status, content={"error": str(exc)})

    return handler


def create_app(orchestrator: Orchestrator, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="contactground", version=__version__)

    app.add_exception_handler(UnknownSessionError, _error_handler(404))
    app.add_exception_handler(BudgetExhaustedError, _error_handler(409))
    app.add_exception_handler(FrameMismatchError, _error_handler(400))
    app.add_exception_handler(SessionError, _error_handler(409))
    app.add_exception_handler(ValueError, _error_handler(400))
    app.add_exception_handler(ContactGroundError, _error_handler(500))

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "version": __version__}

    @app.post("/sessions")
    def create_session(
        image: UploadFile,
        cloud: UploadFile,
        extrinsics: str = Form(...),
        image_id: str | None = Form(None),
    ):
        frame = FrameBundle(
            image=ImageRef.from_png_bytes(image.file.read(), image_id),
            cloud=load_point_cloud(cloud.file.read()),
            extrinsics=CameraExtrinsics.from_json(json.loads(extrinsics)),
        )
        session = orchestrator.create_session(frame)
        return {"id": session.id}

    @app.post("/sessions/{session_id}/utterance")
    def session_utterance(session_id: str, body: UtteranceIn):
        return orchestrator.handle_utterance(session_id, body.text).to_json()

    @app.get("/sessions/{session_id}")
    def session_state(session_id: str):
        return orchestrator.get_session(session_id).to_json()

    @app.get("/sessions/{session_id}/image")
    def session_image(session_id: str):
        session = orchestrator.get_session(session_id)
        return Response(content=session.frame.image.to_png_bytes(), media_type="image/png")

    @app.post("/practice")
    def create_practice(
        image: UploadFile,
        target_u: int | None = Form(None),
        target_v: int | None = Form(None),
        image_id: str | None = Form(None),
    ):
        target = None
        if target_u is not None and target_v is not None:
            target = PixelPoint(u=target_u, v=target_v)
        trial = orchestrator.create_practice(
            ImageRef.from_png_bytes(image.file.read(), image_id), target_center=target
        )
        return trial.to_json()

    @app.get("/practice/{trial_id}")
    def practice_state(trial_id: str):
        return orchestrator.get_practice(trial_id).to_json()

    @app.get("/practice/{trial_id}/image")
    def practice_image(trial_id: str):
        trial = orchestrator.get_practice(trial_id)
        return Response(content=trial.image.to_png_bytes(), media_type="image/png")

    @app.post("/practice/{trial_id}/utterance")
    def practice_utterance(trial_id: str, body: UtteranceIn):
        return orchestrator.handle_practice_utterance(trial_id, body.text)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="console")

    return app


def serve(config: AppConfig) -> None:
    """Run the service until SIGINT/SIGTERM; uvicorn handles graceful shutdown."""
    app = create_app(build_orchestrator(config), config.static_dir)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
