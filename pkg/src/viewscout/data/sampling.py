"""Init-view sampling and conversion of crop annotations to scenes.

The sampler draws a camera-ratio window over the world image subject to
three constraints: a size floor relative to the world, a minimum IoU with
the best ground-truth crop (keeping the subject inside the initial frame),
and an exact 4:3 / 3:4 pixel aspect ratio.
"""

from __future__ import annotations

import numpy as np

from viewscout.boxes import Box, Orientation, iou, to_frame
from viewscout.data.records import (
    IOU_FLOOR,
    SCALE_FLOOR,
    CropAnnotation,
    Scene,
)

SCORE_THRESHOLDS = {"gaicd-style": 4.0, "cpc-style": 2.0, "synthetic": 4.0}

MAX_DRAWS = 10_000
# chance that the sampled orientation matches the world's own orientation
ORIENTATION_MATCH_PROB = 0.8


class InfeasibleSampleError(RuntimeError):
    """Raised when no admissible init view exists for an annotation."""

    def __init__(self, constraint: str, detail: str = ""):
        self.constraint = constraint
        super().__init__(f"no admissible init view: {constraint} constraint failed. {detail}")


def filter_gt(crops: list[CropAnnotation], source_kind: str) -> list[CropAnnotation]:
    """Keep crops scoring strictly above the source threshold, in order."""
    if source_kind not in SCORE_THRESHOLDS:
        raise ValueError(f"unknown source kind {source_kind!r}")
    threshold = SCORE_THRESHOLDS[source_kind]
    return [c for c in crops if c.score > threshold]


def world_orientation(world_w: float, world_h: float) -> Orientation:
    """Orientation of the world canvas; squares count as landscape."""
    return Orientation.LANDSCAPE if world_w >= world_h else Orientation.PORTRAIT


def sample_init_view(
    world_w: int,
    world_h: int,
    gt_best: Box,
    rng_seed: int,
) -> tuple[Box, Orientation, int]:
    """Rejection-sample an init view (absolute px) around the best crop.

    ``gt_best`` is in absolute pixel center form. Returns the accepted view,
    its orientation, and the number of rejected draws. Deterministic per
    seed. Raises :class:`InfeasibleSampleError` after ``MAX_DRAWS`` draws,
    naming the constraint that failed most often.
    """
    rng = np.random.default_rng(rng_seed)
    base = world_orientation(world_w, world_h)
    flipped = (
        Orientation.PORTRAIT if base is Orientation.LANDSCAPE else Orientation.LANDSCAPE
    )
    rejected = {"size": 0, "iou": 0}
    for draw in range(MAX_DRAWS):
        orient = base if rng.random() < ORIENTATION_MATCH_PROB else flipped
        ratio = orient.ratio
        # the size floor applies to both sides; the ratio ties them together
        h_lo = max(SCALE_FLOOR * world_h, SCALE_FLOOR * world_w / ratio)
        h_hi = min(world_h, world_w / ratio)
        if h_lo > h_hi:
            rejected["size"] += 1
            continue
        h = rng.uniform(h_lo, h_hi)
        w = ratio * h
        x = rng.uniform(w / 2, world_w - w / 2) if w < world_w else world_w / 2
        y = rng.uniform(h / 2, world_h - h / 2) if h < world_h else world_h / 2
        view = Box(x, y, w, h)
        if iou(view, gt_best) >= IOU_FLOOR:
            return view, orient, draw
        rejected["iou"] += 1
    worst = max(rejected, key=rejected.get)
    raise InfeasibleSampleError(
        worst,
        f"rejections: {rejected} over {MAX_DRAWS} draws "
        f"(gt {gt_best.as_list()} in {world_w}x{world_h})",
    )


def convert_sample(
    image: str,
    world_w: int,
    world_h: int,
    world_crops: list[CropAnnotation],
    source_kind: str,
    rng_seed: int,
    oracle=None,
) -> Scene:
    """Build a Scene: filter crops, place an init view, re-express crops.

    ``world_crops`` are in absolute pixel center form. Retained crops are
    mapped into the init-view frame, where they may leave [0, 1] — that is
    the unbounded training signal.
    """
    kept = filter_gt(world_crops, source_kind)
    if not kept:
        raise ValueError("no ground-truth crops above the score threshold")
    best = max(kept, key=lambda c: c.score)
    view, orient, _ = sample_init_view(world_w, world_h, best.box, rng_seed)
    converted = [
        CropAnnotation(to_frame(c.box, view), c.score) for c in kept
    ]
    return Scene(
        image=image,
        width=world_w,
        height=world_h,
        init_view=view,
        orientation=orient,
        crops=converted,
        source=source_kind,
        oracle=oracle,
    )
