"""Inference-time product surface.

Turns model predictions into discrete camera operations and runs
multi-step adjustment: crop the world at the current viewport, predict a
better view, move the (simulated) camera there, repeat until the predicted
view stops moving.

Frames and ratios: the world is treated as isotropic, so camera views in
the world frame have a 4:3 or 3:4 ratio. Inside a camera-ratio viewport's
normalized frame those same views become ratio 1:1, and the identity view
(camera stays put) is the unit box. Views are therefore derived in the
world frame and mapped back into the viewport frame.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
import torch

from viewscout.boxes import (
    UNIT_BOX,
    Box,
    Orientation,
    clamp_to_world,
    derive_view,
    derive_view_with_ratio,
    from_frame,
    iou,
    to_frame,
)
from viewscout.data.loader import crop_view, _to_input_tensor
from viewscout.model.network import CompositionNet

OP_THRESHOLD = 0.05
TAU_CONV = 0.95
DEFAULT_MAX_STEPS = 3


@dataclass
class Operation:
    kind: str      # move-left | move-right | move-up | move-down | zoom-in | zoom-out
    amount: float  # pan distance in frame units, or zoom factor (> 1)

    def to_json(self) -> dict:
        return {"kind": self.kind, "amount": self.amount}


@dataclass
class Recommendation:
    operations: list[Operation]
    view: Box          # predicted camera view, current-frame normalized
    crop: Box          # predicted composition crop, current-frame normalized
    confidence: float
    converged: bool

    def to_json(self) -> dict:
        return {
            "operations": [op.to_json() for op in self.operations],
            "view": self.view.as_list(),
            "crop": self.crop.as_list(),
            "confidence": self.confidence,
            "converged": self.converged,
        }


def derive_ops(v_pred: Box, threshold: float = OP_THRESHOLD) -> list[Operation]:
    """Camera operations moving the identity view onto ``v_pred``.

    The identity (no movement) is the unit box of the current frame. Pans
    are emitted for center offsets above the threshold, a zoom when the
    predicted width deviates from 1 by more than the threshold
    (w > 1 widens the field of view: zoom out by w; w < 1 zooms in by 1/w).
    """
    ops: list[Operation] = []
    dx = v_pred.x - 0.5
    dy = v_pred.y - 0.5
    if abs(dx) > threshold:
        ops.append(Operation("move-right" if dx > 0 else "move-left", abs(dx)))
    if abs(dy) > threshold:
        ops.append(Operation("move-down" if dy > 0 else "move-up", abs(dy)))
    if abs(v_pred.w - 1.0) > threshold:
        if v_pred.w > 1.0:
            ops.append(Operation("zoom-out", v_pred.w))
        else:
            ops.append(Operation("zoom-in", 1.0 / v_pred.w))
    return ops


@dataclass
class TrajectoryStep:
    viewport: Box               # world frame, before applying the step
    recommendation: Recommendation
    next_viewport: Box          # world frame, after applying (clamped)
    iou_to_previous: float      # viewport IoU between before and after

    def to_json(self) -> dict:
        return {
            "viewport": self.viewport.as_list(),
            "recommendation": self.recommendation.to_json(),
            "next_viewport": self.next_viewport.as_list(),
            "iou_to_previous": self.iou_to_previous,
        }


@dataclass
class Session:
    id: str
    world: np.ndarray                   # uint8 RGB
    trajectory: list[TrajectoryStep] = field(default_factory=list)
    max_steps: int = 64
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def world_size(self) -> tuple[int, int]:
        return self.world.shape[1], self.world.shape[0]  # (w, h)


class ViewAdvisor:
    """Wraps a trained model with the operation/adjustment logic."""

    def __init__(self, model: CompositionNet, tau_conv: float = TAU_CONV,
                 op_threshold: float = OP_THRESHOLD):
        self.model = model
        self.tau_conv = tau_conv
        self.op_threshold = op_threshold

    def _predict_crop(self, frame_rgb: np.ndarray, orientation: Orientation) -> tuple[Box, float]:
        import cv2

        h_in, w_in = self.model.config.input_size(orientation)
        if frame_rgb.shape[:2] != (h_in, w_in):
            frame_rgb = cv2.resize(frame_rgb, (w_in, h_in), interpolation=cv2.INTER_LINEAR)
        tensor = torch.from_numpy(_to_input_tensor(frame_rgb))[None]
        preds = self.model.predict(tensor)
        crop = preds.top_crop(0)
        conf = float(preds.confidences[0].max())
        return crop, conf

    def recommend_frame(self, frame_rgb: np.ndarray,
                        orientation: Orientation = Orientation.LANDSCAPE) -> Recommendation:
        """Recommendation for a standalone camera frame.

        The frame is its own reference: views of the camera ratio are unit
        aspect in its normalized coordinates.
        """
        crop, conf = self._predict_crop(frame_rgb, orientation)
        view = derive_view_with_ratio(crop, 1.0)
        converged = iou(view, UNIT_BOX) >= self.tau_conv
        ops = [] if converged else derive_ops(view, self.op_threshold)
        return Recommendation(ops, view, crop, conf, converged)

    def recommend_viewport(self, world_rgb: np.ndarray, viewport: Box,
                           orientation: Orientation) -> tuple[Recommendation, Box]:
        """One adjustment step on a world viewport (world-normalized box).

        Returns the recommendation (in the viewport's frame) and the next
        viewport (world frame, clamped to the world). A converged
        recommendation leaves the viewport unchanged.
        """
        world_h, world_w = world_rgb.shape[:2]
        viewport_px = Box(viewport.x * world_w, viewport.y * world_h,
                          viewport.w * world_w, viewport.h * world_h)
        h_in, w_in = self.model.config.input_size(orientation)
        frame = crop_view(world_rgb, viewport_px, h_in, w_in)
        crop, conf = self._predict_crop(frame, orientation)

        crop_world = from_frame(crop, viewport)
        # camera ratio is a pixel ratio; in world-normalized units it is
        # scaled by the world's own aspect
        ratio_norm = Orientation(orientation).ratio * world_h / world_w
        view_world = derive_view_with_ratio(crop_world, ratio_norm)
        view_local = to_frame(view_world, viewport)
        converged = iou(view_local, UNIT_BOX) >= self.tau_conv
        ops = [] if converged else derive_ops(view_local, self.op_threshold)
        rec = Recommendation(ops, view_local, crop, conf, converged)
        next_viewport = viewport if converged else clamp_to_world(view_world, orientation)
        return rec, next_viewport

    def run_multistep(self, world_rgb: np.ndarray, init_viewport: Box,
                      orientation: Orientation,
                      max_steps: int = DEFAULT_MAX_STEPS) -> list[TrajectoryStep]:
        """Iterate recommendations until convergence or ``max_steps``."""
        viewport = clamp_to_world(init_viewport, orientation)
        steps: list[TrajectoryStep] = []
        for _ in range(max_steps):
            rec, next_viewport = self.recommend_viewport(world_rgb, viewport, orientation)
            steps.append(TrajectoryStep(
                viewport=viewport,
                recommendation=rec,
                next_viewport=next_viewport,
                iou_to_previous=iou(viewport, next_viewport),
            ))
            if rec.converged:
                break
            viewport = next_viewport
        return steps


class SessionStore:
    """Independent sessions; per-session requests are serialized."""

    def __init__(self, max_steps: int = 64):
        self._sessions: dict[str, Session] = {}
        self._store_lock = threading.Lock()
        self.max_steps = max_steps

    def create(self, world_rgb: np.ndarray) -> Session:
        session = Session(id=uuid.uuid4().hex, world=world_rgb, max_steps=self.max_steps)
        with self._store_lock:
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._store_lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise KeyError(session_id)
        return session

    def delete(self, session_id: str) -> None:
        with self._store_lock:
            if session_id not in self._sessions:
                raise KeyError(session_id)
            del self._sessions[session_id]

    def step(self, advisor: ViewAdvisor, session_id: str, viewport: Box,
             orientation: Orientation) -> tuple[TrajectoryStep, int]:
        """Run one recommendation inside the session's lock."""
        session = self.get(session_id)
        with session.lock:
            if len(session.trajectory) >= session.max_steps:
                raise RuntimeError(f"session {session_id} exceeded {session.max_steps} steps")
            viewport = clamp_to_world(viewport, None)
            rec, next_viewport = advisor.recommend_viewport(session.world, viewport, orientation)
            step = TrajectoryStep(
                viewport=viewport,
                recommendation=rec,
                next_viewport=next_viewport,
                iou_to_previous=iou(viewport, next_viewport),
            )
            session.trajectory.append(step)
            return step, len(session.trajectory) - 1
