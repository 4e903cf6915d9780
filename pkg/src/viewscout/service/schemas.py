"""Request/response models for the session API."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, field_validator

BoxList = list[float]  # [x, y, w, h], center form


class SessionCreated(BaseModel):
    session_id: str
    world_w: int
    world_h: int


class RecommendRequest(BaseModel):
    viewport: BoxList = Field(..., description="world-normalized [x, y, w, h]")
    orientation: Literal["landscape", "portrait"] = "landscape"

    @field_validator("viewport")
    @classmethod
    def _check_viewport(cls, v: BoxList) -> BoxList:
        if len(v) != 4:
            raise ValueError("viewport must be [x, y, w, h]")
        if v[2] <= 0 or v[3] <= 0:
            raise ValueError("viewport sides must be positive")
        return v


class OperationModel(BaseModel):
    kind: str
    amount: float


class RecommendResponse(BaseModel):
    operations: list[OperationModel]
    view: BoxList
    crop: BoxList
    confidence: float
    converged: bool
    step_index: int
    next_viewport: BoxList


class TrajectoryStepModel(BaseModel):
    viewport: BoxList
    operations: list[OperationModel]
    view: BoxList
    crop: BoxList
    confidence: float
    converged: bool
    next_viewport: BoxList
    iou_to_previous: float


class TrajectoryResponse(BaseModel):
    session_id: str
    world_w: int
    world_h: int
    steps: list[TrajectoryStepModel]


class ErrorResponse(BaseModel):
    detail: str
