"""Procedural scenes with a closed-form composition oracle.

Each world is a 512x512 gradient background with one salient object. The
best crop is fully determined by the object: a minimal camera-ratio box
whose height is three times the object's, positioned so the object centroid
sits on the rule-of-thirds intersection nearest the object's side of the
world (ties toward the top-left intersection). A dense set of candidate
crops is scored against this rule to mimic grid-annotated cropping data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from viewscout.boxes import Box
from viewscout.data.records import CropAnnotation, Scene, SceneOracle, save_scenes
from viewscout.data.sampling import InfeasibleSampleError, convert_sample

WORLD_SIZE = 512

# oracle_score penalty weights; errors are normalized to [0, 1]
K_THIRDS = 3.0
K_SCALE = 1.0
K_TRUNC = 2.0

# object height is 1/3 of the crop height; crops this tall stay compatible
# with the init-view sampler (IoU floor 0.7 against a >=0.7-scale window)
CROP_HEIGHT_RANGE = (0.62, 0.75)
OBJECT_ASPECT_RANGE = (0.7, 1.8)
# objects keep clear of the world median lines so their side of the world
# (which fixes the thirds placement) stays inferable from a partial view;
# the init view hides up to ~0.1 of vertical world position, so the y
# margin is the wider one
CENTER_MARGIN_X = 0.06
CENTER_MARGIN_Y = 0.12

GRID_ANCHOR_HEIGHTS = (0.56, 0.60, 0.64, 0.68, 0.72, 0.75)
GRID_ANCHOR_POSITIONS = 7
MAX_GT_CROPS = 24


def _thirds_for(obj_x: float, obj_y: float) -> tuple[float, float]:
    """Thirds intersection assigned to an object: its side of the world,
    ties toward (1/3, 1/3)."""
    tx = 1 / 3 if obj_x <= 0.5 else 2 / 3
    ty = 1 / 3 if obj_y <= 0.5 else 2 / 3
    return tx, ty


def oracle_crop_for_object(object_box: Box) -> Box:
    """Best crop implied by an object: minimal 4:3 box with the object at
    1/3 of its height, centroid on the designated thirds intersection."""
    tx, ty = _thirds_for(object_box.x, object_box.y)
    # width containment can bind for very wide objects: the centroid sits a
    # third of the way in, so the far side must cover 2/3 of the width
    h = max(3.0 * object_box.h, 1.125 * object_box.w)
    w = h * 4 / 3
    return Box(object_box.x - (tx - 0.5) * w, object_box.y - (ty - 0.5) * h, w, h)


def oracle_score(oracle: SceneOracle, box: Box) -> float:
    """Score a crop in [0, 5] against the scene's composition rule.

    Penalizes distance of the object centroid from the crop's designated
    thirds intersection, deviation from the 1/3-height object scale, and
    truncation of the object. Continuous in the box; maximized (score 5)
    exactly by the oracle crop.
    """
    obj = oracle.object_box
    tx, ty = oracle.thirds_point
    px = box.x + (tx - 0.5) * box.w
    py = box.y + (ty - 0.5) * box.h
    half_diag = 0.5 * math.hypot(box.w, box.h)
    e_thirds = min(1.0, math.hypot(obj.x - px, obj.y - py) / half_diag)
    e_scale = min(1.0, abs(3.0 * obj.h / box.h - 1.0))
    ox1, oy1, ox2, oy2 = obj.corners
    bx1, by1, bx2, by2 = box.corners
    ow = max(0.0, min(ox2, bx2) - max(ox1, bx1))
    oh = max(0.0, min(oy2, by2) - max(oy1, by1))
    e_trunc = 1.0 - (ow * oh) / (obj.w * obj.h)
    return max(0.0, 5.0 - K_THIRDS * e_thirds - K_SCALE * e_scale - K_TRUNC * e_trunc)


@dataclass
class _WorldParams:
    crop: Box
    object_box: Box
    thirds_point: tuple[float, float]
    object_kind: str
    bg_color0: np.ndarray
    bg_color1: np.ndarray
    bg_angle: float
    object_color: np.ndarray


def _sample_world(rng: np.random.Generator) -> _WorldParams:
    """Draw scene parameters: crop-first, then the object it implies."""
    while True:
        h_box = rng.uniform(*CROP_HEIGHT_RANGE)
        w_box = h_box * 4 / 3
        cx = rng.uniform(w_box / 2, 1 - w_box / 2)
        cy = rng.uniform(h_box / 2, 1 - h_box / 2)
        tx = rng.choice([1 / 3, 2 / 3])
        ty = rng.choice([1 / 3, 2 / 3])
        obj_x = cx + (tx - 0.5) * w_box
        obj_y = cy + (ty - 0.5) * h_box
        # the thirds rule must recover this placement from the object alone,
        # with a margin so the side of the world is visually unambiguous
        if (tx, ty) != _thirds_for(obj_x, obj_y):
            continue
        if abs(obj_x - 0.5) < CENTER_MARGIN_X or abs(obj_y - 0.5) < CENTER_MARGIN_Y:
            continue
        break
    h_obj = h_box / 3
    w_obj = h_obj * rng.uniform(*OBJECT_ASPECT_RANGE)
    kind = "ellipse" if rng.random() < 0.5 else "rectangle"

    c0 = rng.integers(0, 256, size=3).astype(np.float64)
    c1 = rng.integers(0, 256, size=3).astype(np.float64)
    while True:
        obj_color = rng.integers(0, 256, size=3).astype(np.float64)
        if min(np.linalg.norm(obj_color - c0), np.linalg.norm(obj_color - c1)) >= 100:
            break
    return _WorldParams(
        crop=Box(cx, cy, w_box, h_box),
        object_box=Box(obj_x, obj_y, w_obj, h_obj),
        thirds_point=(tx, ty),
        object_kind=kind,
        bg_color0=c0,
        bg_color1=c1,
        bg_angle=rng.uniform(0, 2 * math.pi),
        object_color=obj_color,
    )


def render_world(params: _WorldParams, size: int = WORLD_SIZE) -> np.ndarray:
    """Rasterize the world as uint8 RGB."""
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64) / size
    t = 0.5 + (math.cos(params.bg_angle) * (xs - 0.5)
               + math.sin(params.bg_angle) * (ys - 0.5)) / math.sqrt(2)
    img = (params.bg_color0[None, None, :] * (1 - t[..., None])
           + params.bg_color1[None, None, :] * t[..., None])
    img = np.clip(img, 0, 255).astype(np.uint8)

    obj = params.object_box
    color = tuple(int(v) for v in params.object_color)
    if params.object_kind == "ellipse":
        center = (int(round(obj.x * size)), int(round(obj.y * size)))
        axes = (int(round(obj.w / 2 * size)), int(round(obj.h / 2 * size)))
        cv2.ellipse(img, center, axes, 0, 0, 360, color, -1)
    else:
        x1, y1, x2, y2 = obj.corners
        cv2.rectangle(
            img,
            (int(round(x1 * size)), int(round(y1 * size))),
            (int(round(x2 * size)), int(round(y2 * size))),
            color,
            -1,
        )
    return img


def _grid_anchor_candidates(oracle: SceneOracle) -> list[CropAnnotation]:
    """Dense camera-ratio candidates scored by the oracle, world-normalized."""
    out = []
    for h in GRID_ANCHOR_HEIGHTS:
        w = h * 4 / 3
        if w > 1.0:
            continue
        xs = np.linspace(w / 2, 1 - w / 2, GRID_ANCHOR_POSITIONS)
        ys = np.linspace(h / 2, 1 - h / 2, GRID_ANCHOR_POSITIONS)
        for x in xs:
            for y in ys:
                box = Box(float(x), float(y), w, h)
                out.append(CropAnnotation(box, oracle_score(oracle, box)))
    return out


def make_synthetic_scene(rng_seed: int, image_name: str = "") -> tuple[Scene, np.ndarray]:
    """Build one scene plus its rendered world. Deterministic per seed.

    Regenerates internally if the drawn geometry admits no valid init view.
    """
    rng = np.random.default_rng(rng_seed)
    for _ in range(64):
        params = _sample_world(rng)
        oracle = SceneOracle(
            crop=params.crop,
            object_box=params.object_box,
            thirds_point=params.thirds_point,
            object_kind=params.object_kind,
        )
        anchors = [c for c in _grid_anchor_candidates(oracle) if c.score > 4.0]
        anchors.sort(key=lambda c: c.score, reverse=True)
        crops_world = [CropAnnotation(oracle.crop, 5.0)] + anchors[: MAX_GT_CROPS - 1]
        crops_px = [
            CropAnnotation(
                Box(
                    c.box.x * WORLD_SIZE,
                    c.box.y * WORLD_SIZE,
                    c.box.w * WORLD_SIZE,
                    c.box.h * WORLD_SIZE,
                ),
                c.score,
            )
            for c in crops_world
        ]
        init_seed = int(rng.integers(0, 2**31 - 1))
        try:
            scene = convert_sample(
                image=image_name,
                world_w=WORLD_SIZE,
                world_h=WORLD_SIZE,
                world_crops=crops_px,
                source_kind="synthetic",
                rng_seed=init_seed,
                oracle=oracle,
            )
        except InfeasibleSampleError:
            continue
        return scene, render_world(params)
    raise InfeasibleSampleError("placement", f"64 regenerations failed for seed {rng_seed}")


def build_synthetic_dataset(count: int, seed: int, out_dir: str | Path) -> list[Scene]:
    """Write ``count`` scenes (images/ + scenes.jsonl) under ``out_dir``.

    Per-sample seeds are ``seed XOR index`` so samples are independent and
    the batch is reproducible.
    """
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    scenes = []
    for i in range(count):
        name = f"images/scene_{i:06d}.png"
        scene, world = make_synthetic_scene(seed ^ i, image_name=name)
        cv2.imwrite(str(out_dir / name), cv2.cvtColor(world, cv2.COLOR_RGB2BGR))
        scenes.append(scene)
    save_scenes(out_dir / "scenes.jsonl", scenes)
    return scenes


def load_world_image(scene: Scene, root: str | Path) -> np.ndarray:
    """Load the scene's world image as uint8 RGB."""
    path = Path(root) / scene.image
    img = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if img is None:
        raise FileNotFoundError(f"cannot read image {path}")
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB)
