"""Geometry for unbounded normalized boxes.

Boxes are stored in center form ``[x, y, w, h]`` relative to a declared
reference frame. Coordinates are allowed to leave ``[0, 1]``: a box may
describe a region outside the frame it is expressed in. Corner form is a
derived view, never a second source of truth.

All functions are pure; nothing here holds state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class Orientation(str, Enum):
    """Camera orientation, fixing the view aspect ratio to 4:3 or 3:4."""

    LANDSCAPE = "landscape"
    PORTRAIT = "portrait"

    @property
    def ratio(self) -> float:
        """Width over height of the camera frame."""
        return 4.0 / 3.0 if self is Orientation.LANDSCAPE else 3.0 / 4.0


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in center form, normalized to some frame.

    ``x, y`` locate the center, ``w, h`` are strictly positive extents.
    Values outside ``[0, 1]`` are legal and denote regions beyond the frame.
    """

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for v in (self.x, self.y, self.w, self.h):
            if not math.isfinite(v):
                raise ValueError(f"box has non-finite component: {self}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box sides must be positive, got w={self.w}, h={self.h}")

    @property
    def corners(self) -> tuple[float, float, float, float]:
        """(x1, y1, x2, y2) corner form."""
        return (
            self.x - self.w / 2,
            self.y - self.h / 2,
            self.x + self.w / 2,
            self.y + self.h / 2,
        )

    @classmethod
    def from_corners(cls, x1: float, y1: float, x2: float, y2: float) -> "Box":
        return cls((x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1)

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]

    @classmethod
    def from_list(cls, values) -> "Box":
        x, y, w, h = values
        return cls(float(x), float(y), float(w), float(h))

    def contains(self, other: "Box", tol: float = 1e-9) -> bool:
        ax1, ay1, ax2, ay2 = self.corners
        bx1, by1, bx2, by2 = other.corners
        return (
            ax1 <= bx1 + tol and ay1 <= by1 + tol and ax2 >= bx2 - tol and ay2 >= by2 - tol
        )


UNIT_BOX = Box(0.5, 0.5, 1.0, 1.0)


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes in the same frame.

    Correct for boxes with negative corner coordinates; 0 when disjoint.
    """
    ax1, ay1, ax2, ay2 = a.corners
    bx1, by1, bx2, by2 = b.corners
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    # areas from corner form so identical boxes give exactly 1.0
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union


def disp(a: Box, b: Box) -> float:
    """Boundary displacement: mean absolute offset of the four edges / 4."""
    ca = a.corners
    cb = b.corners
    return sum(abs(u - v) for u, v in zip(ca, cb)) / 4.0


def derive_view_with_ratio(crop: Box, ratio: float) -> Box:
    """Smallest box of aspect ``ratio`` (w/h) sharing the crop's center and
    containing the crop. Keeps the crop's width when the crop is wider than
    the target ratio, its height otherwise."""
    if ratio <= 0:
        raise ValueError(f"ratio must be positive, got {ratio}")
    if crop.w >= crop.h * ratio:
        return Box(crop.x, crop.y, crop.w, crop.w / ratio)
    return Box(crop.x, crop.y, crop.h * ratio, crop.h)


def derive_view(crop: Box, orientation: Orientation) -> Box:
    """Camera view implied by a composition crop.

    The view shares the crop's center, has the exact camera aspect ratio
    (4:3 landscape, 3:4 portrait in the frame's units), and is the minimal
    such box containing the crop. A crop already at the camera ratio maps
    to itself.
    """
    return derive_view_with_ratio(crop, Orientation(orientation).ratio)


def to_frame(box: Box, frame: Box) -> Box:
    """Re-express ``box`` in the normalized coordinates of ``frame``.

    Both inputs live in a common outer frame; the result treats ``frame`` as
    the unit box. Coordinates may leave [0, 1] when ``box`` pokes outside."""
    fx1 = frame.x - frame.w / 2
    fy1 = frame.y - frame.h / 2
    return Box(
        (box.x - fx1) / frame.w,
        (box.y - fy1) / frame.h,
        box.w / frame.w,
        box.h / frame.h,
    )


def from_frame(box: Box, frame: Box) -> Box:
    """Inverse of :func:`to_frame`: map frame-normalized coords back out."""
    fx1 = frame.x - frame.w / 2
    fy1 = frame.y - frame.h / 2
    return Box(
        fx1 + box.x * frame.w,
        fy1 + box.y * frame.h,
        box.w * frame.w,
        box.h * frame.h,
    )


def clamp_to_world(view: Box, orientation: Orientation | None = None) -> Box:
    """Fit a view inside the unit world box with minimal disturbance.

    Translates without rescaling when the view fits; when the view exceeds
    the world in some dimension it is shrunk uniformly (aspect preserved)
    until it fits, then translated per axis. Translation is the smallest
    that achieves containment, which maximizes overlap with the input.
    """
    scale = max(view.w, view.h, 1.0)
    w = view.w / scale
    h = view.h / scale

    def _slide(c: float, extent: float) -> float:
        half = extent / 2
        lo, hi = half, 1.0 - half
        # extent == 1 forces the center to 0.5
        return min(max(c, lo), hi)

    return Box(_slide(view.x, w), _slide(view.y, h), w, h)


# ---------------------------------------------------------------------------
# Vectorized helpers on (N, 4) center-form arrays. Used by the dataset
# sampler and metrics where per-Box calls would be too slow.


def cxcywh_to_xyxy(boxes: np.ndarray) -> np.ndarray:
    boxes = np.asarray(boxes, dtype=np.float64)
    half = boxes[..., 2:] / 2
    return np.concatenate([boxes[..., :2] - half, boxes[..., :2] + half], axis=-1)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between (N, 4) and (M, 4) center-form boxes."""
    xa = cxcywh_to_xyxy(a)
    xb = cxcywh_to_xyxy(b)
    area_a = (xa[:, 2] - xa[:, 0]) * (xa[:, 3] - xa[:, 1])
    area_b = (xb[:, 2] - xb[:, 0]) * (xb[:, 3] - xb[:, 1])
    lt = np.maximum(xa[:, None, :2], xb[None, :, :2])
    rb = np.minimum(xa[:, None, 2:], xb[None, :, 2:])
    wh = np.clip(rb - lt, 0.0, None)
    inter = wh[..., 0] * wh[..., 1]
    union = area_a[:, None] + area_b[None, :] - inter
    return inter / union
