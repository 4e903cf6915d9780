"""HTTP session API over the view advisor.

Sessions hold one world image each; repeated /recommend calls walk the
camera toward a better view. Requests to distinct sessions run in
parallel; requests to one session are serialized by its lock. The model
is shared read-only.
"""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np
from fastapi import FastAPI, File, HTTPException, UploadFile
from fastapi.staticfiles import StaticFiles

from viewscout.advisor import SessionStore, TrajectoryStep, ViewAdvisor
from viewscout.boxes import Box, Orientation
from viewscout.model.checkpoint import load_checkpoint
from viewscout.model.network import CompositionNet
from viewscout.service.schemas import (
    OperationModel,
    RecommendRequest,
    RecommendResponse,
    SessionCreated,
    TrajectoryResponse,
    TrajectoryStepModel,
)


def _step_payload(step: TrajectoryStep, index: int) -> RecommendResponse:
    rec = step.recommendation
    return RecommendResponse(
        operations=[OperationModel(kind=o.kind, amount=o.amount) for o in rec.operations],
        view=rec.view.as_list(),
        crop=rec.crop.as_list(),
        confidence=rec.confidence,
        converged=rec.converged,
        step_index=index,
        next_viewport=step.next_viewport.as_list(),
    )


def create_app(model: CompositionNet | str | Path,
               frontend_dir: str | Path | None = None,
               max_session_steps: int = 64) -> FastAPI:
    if not isinstance(model, CompositionNet):
        model = load_checkpoint(model)
    advisor = ViewAdvisor(model)
    store = SessionStore(max_steps=max_session_steps)

    app = FastAPI(title="viewscout", version="0.1.0")
    app.state.advisor = advisor
    app.state.sessions = store

    @app.post("/v1/sessions", response_model=SessionCreated)
    async def create_session(image: UploadFile = File(...)) -> SessionCreated:
        data = await image.read()
        buf = np.frombuffer(data, dtype=np.uint8)
        decoded = cv2.imdecode(buf, cv2.IMREAD_COLOR)
        if decoded is None:
            raise HTTPException(status_code=422, detail="cannot decode image")
        world = cv2.cvtColor(decoded, cv2.COLOR_BGR2RGB)
        session = store.create(world)
        return SessionCreated(
            session_id=session.id,
            world_w=session.world_size[0],
            world_h=session.world_size[1],
        )

    @app.post("/v1/sessions/{session_id}/recommend", response_model=RecommendResponse)
    def recommend(session_id: str, request: RecommendRequest) -> RecommendResponse:
        try:
            viewport = Box.from_list(request.viewport)
        except ValueError as err:
            raise HTTPException(status_code=422, detail=str(err))
        try:
            step, index = store.step(
                advisor, session_id, viewport, Orientation(request.orientation)
            )
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        except RuntimeError as err:
            raise HTTPException(status_code=409, detail=str(err))
        return _step_payload(step, index)

    @app.get("/v1/sessions/{session_id}", response_model=TrajectoryResponse)
    def trajectory(session_id: str) -> TrajectoryResponse:
        try:
            session = store.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        steps = [
            TrajectoryStepModel(
                viewport=s.viewport.as_list(),
                operations=[OperationModel(kind=o.kind, amount=o.amount)
                            for o in s.recommendation.operations],
                view=s.recommendation.view.as_list(),
                crop=s.recommendation.crop.as_list(),
                confidence=s.recommendation.confidence,
                converged=s.recommendation.converged,
                next_viewport=s.next_viewport.as_list(),
                iou_to_previous=s.iou_to_previous,
            )
            for s in session.trajectory
        ]
        return TrajectoryResponse(
            session_id=session.id,
            world_w=session.world_size[0],
            world_h=session.world_size[1],
            steps=steps,
        )

    @app.delete("/v1/sessions/{session_id}")
    def delete_session(session_id: str) -> dict:
        try:
            store.delete(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return {"deleted": session_id}

    @app.get("/v1/health")
    def health() -> dict:
        return {"status": "ok", "queries": model.config.num_queries}

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="ui")

    return app
