"""Batch preparation for training and evaluation.

Produces, per scene: the init view resampled to the model input size, the
ground-truth crops in (possibly jittered) init-frame coordinates, and a
teacher canvas — the world resampled onto the model's extended grid so
that every grid cell of the extrapolation ring corresponds to exactly one
teacher cell. Cells whose world footprint leaves the image are masked
invalid (the canvas is edge-replicated there, but never supervised).
"""

from __future__ import annotations

from collections import OrderedDict
from pathlib import Path

import cv2
import numpy as np
import torch

from viewscout.boxes import (
    Box,
    Orientation,
    derive_view_with_ratio,
    from_frame,
    to_frame,
)
from viewscout.data.records import Scene
from viewscout.model.network import ModelConfig


def _warp_rect(world: np.ndarray, x0: float, y0: float, sx: float, sy: float,
               out_w: int, out_h: int, replicate: bool) -> np.ndarray:
    mat = np.array([[sx, 0.0, -x0 * sx], [0.0, sy, -y0 * sy]], dtype=np.float64)
    border = cv2.BORDER_REPLICATE if replicate else cv2.BORDER_CONSTANT
    return cv2.warpAffine(world, mat, (out_w, out_h),
                          flags=cv2.INTER_LINEAR, borderMode=border)


def crop_view(world: np.ndarray, view_px: Box, out_h: int, out_w: int) -> np.ndarray:
    """Resample the view rectangle (world pixels) to (out_h, out_w) RGB."""
    x0 = view_px.x - view_px.w / 2
    y0 = view_px.y - view_px.h / 2
    return _warp_rect(world, x0, y0, out_w / view_px.w, out_h / view_px.h,
                      out_w, out_h, replicate=True)


def teacher_canvas(world: np.ndarray, view_px: Box, config: ModelConfig,
                   orientation: Orientation) -> tuple[np.ndarray, np.ndarray]:
    """World resampled onto the extended grid around the view.

    Returns (canvas RGB of (rows+2m)*stride x (cols+2m)*stride pixels,
    valid mask (rows+2m, cols+2m) marking cells fully inside the world).
    """
    h_in, w_in = config.input_size(orientation)
    s = config.stride
    rows, cols = h_in // s, w_in // s
    m = config.margin
    cell_w = view_px.w / cols
    cell_h = view_px.h / rows
    x0 = view_px.x - view_px.w / 2 - m * cell_w
    y0 = view_px.y - view_px.h / 2 - m * cell_h
    out_w = (cols + 2 * m) * s
    out_h = (rows + 2 * m) * s
    canvas = _warp_rect(world, x0, y0, s / cell_w, s / cell_h, out_w, out_h,
                        replicate=True)

    world_h, world_w = world.shape[:2]
    tol = 1e-6 * max(world_w, world_h)
    js = np.arange(cols + 2 * m)
    is_ = np.arange(rows + 2 * m)
    cx_lo = x0 + js * cell_w
    cy_lo = y0 + is_ * cell_h
    col_ok = (cx_lo >= -tol) & (cx_lo + cell_w <= world_w + tol)
    row_ok = (cy_lo >= -tol) & (cy_lo + cell_h <= world_h + tol)
    valid = row_ok[:, None] & col_ok[None, :]
    return canvas, valid


def _to_input_tensor(img: np.ndarray) -> np.ndarray:
    x = img.astype(np.float32) / 255.0
    return np.ascontiguousarray(((x - 0.5) / 0.5).transpose(2, 0, 1))


def _color_jitter(world: np.ndarray, rng: np.random.Generator, strength: float) -> np.ndarray:
    x = world.astype(np.float32)
    brightness = rng.uniform(1 - strength, 1 + strength)
    contrast = rng.uniform(1 - strength, 1 + strength)
    x = x * brightness
    mean = x.mean(axis=(0, 1), keepdims=True)
    x = (x - mean) * contrast + mean
    # per-channel gain approximates saturation/hue jitter
    gains = rng.uniform(1 - strength / 2, 1 + strength / 2, size=3).astype(np.float32)
    x = x * gains[None, None, :]
    return np.clip(x, 0, 255).astype(np.uint8)


def _jitter_view(view_px: Box, world_w: int, world_h: int,
                 rng: np.random.Generator, strength: float) -> Box:
    """Rescale/translate the init view slightly, ratio preserved, inside
    the world."""
    ratio = view_px.w / view_px.h
    w_cap = min(float(world_w), world_h * ratio)
    w = view_px.w * rng.uniform(1 - strength, 1 + strength)
    w = min(w, w_cap)
    h = w / ratio
    x = view_px.x + rng.uniform(-strength, strength) * view_px.w
    y = view_px.y + rng.uniform(-strength, strength) * view_px.h
    x = min(max(x, w / 2), world_w - w / 2)
    y = min(max(y, h / 2), world_h - h / 2)
    return Box(x, y, w, h)


def _best_view_reframe(scene: Scene, rng: np.random.Generator) -> Box:
    """A training view placed near the best ground truth's camera view.

    Multi-step adjustment feeds the model its own previous prediction, so
    the input distribution must include well-composed framings (where the
    right answer is "stay"). Returns an absolute-pixel view."""
    best_world = from_frame(scene.best_crop().box, scene.init_view_normalized())
    ratio_norm = Orientation(scene.orientation).ratio * scene.height / scene.width
    gt_view = derive_view_with_ratio(best_world, ratio_norm)
    scale = rng.uniform(1.0, 1.15)
    w = min(gt_view.w * scale, 1.0)
    h = w / ratio_norm
    if h > 1.0:
        h = 1.0
        w = h * ratio_norm
    x = gt_view.x + rng.uniform(-0.03, 0.03)
    y = gt_view.y + rng.uniform(-0.03, 0.03)
    x = min(max(x, w / 2), 1 - w / 2)
    y = min(max(y, h / 2), 1 - h / 2)
    return Box(x * scene.width, y * scene.height, w * scene.width, h * scene.height)


class SceneDataset:
    """Deterministic per-(seed, epoch, index) sample preparation."""

    def __init__(
        self,
        scenes: list[Scene],
        root: str | Path,
        config: ModelConfig,
        augment: bool = False,
        color_jitter: float = 0.2,
        view_jitter: float = 0.04,
        reframe_prob: float = 0.3,
        seed: int = 0,
        cache_size: int = 2500,
    ):
        self.scenes = scenes
        self.root = Path(root)
        self.config = config
        self.augment = augment
        self.color_jitter_strength = color_jitter
        self.view_jitter_strength = view_jitter
        self.reframe_prob = reframe_prob
        self.seed = seed
        self._cache: OrderedDict[int, np.ndarray] = OrderedDict()
        self._cache_size = cache_size

    def __len__(self) -> int:
        return len(self.scenes)

    def load_world(self, idx: int) -> np.ndarray:
        cached = self._cache.get(idx)
        if cached is not None:
            self._cache.move_to_end(idx)
            return cached
        path = self.root / self.scenes[idx].image
        img = cv2.imread(str(path), cv2.IMREAD_COLOR)
        if img is None:
            raise FileNotFoundError(f"cannot read image {path}")
        img = cv2.cvtColor(img, cv2.COLOR_BGR2RGB)
        self._cache[idx] = img
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return img

    def sample(self, idx: int, epoch: int = 0, augment: bool | None = None) -> dict:
        scene = self.scenes[idx]
        world = self.load_world(idx)
        augment = self.augment if augment is None else augment
        view_px = scene.init_view
        if augment:
            rng = np.random.default_rng([self.seed, epoch, idx])
            world = _color_jitter(world, rng, self.color_jitter_strength)
            if rng.random() < self.reframe_prob:
                view_px = _best_view_reframe(scene, rng)
            else:
                view_px = _jitter_view(view_px, scene.width, scene.height, rng,
                                       self.view_jitter_strength)

        h_in, w_in = self.config.input_size(scene.orientation)
        image = _to_input_tensor(crop_view(world, view_px, h_in, w_in))

        # ground truths relative to the (possibly jittered) view
        orig_norm = scene.init_view_normalized()
        new_norm = Box(view_px.x / scene.width, view_px.y / scene.height,
                       view_px.w / scene.width, view_px.h / scene.height)
        boxes = []
        for c in scene.crops:
            world_box = from_frame(c.box, orig_norm)
            boxes.append(to_frame(world_box, new_norm).as_list())
        gt_boxes = np.asarray(boxes, dtype=np.float32)
        gt_scores = np.asarray([c.score for c in scene.crops], dtype=np.float32)

        out = {
            "index": idx,
            "orientation": Orientation(scene.orientation),
            "image": image,
            "gt_boxes": gt_boxes,
            "gt_scores": gt_scores,
        }
        if self.config.margin > 0:
            canvas, valid = teacher_canvas(world, view_px, self.config,
                                           scene.orientation)
            out["canvas"] = _to_input_tensor(canvas)
            out["valid"] = valid
        return out

    def batches(self, epoch: int, batch_size: int, shuffle: bool = True,
                augment: bool | None = None):
        """Yield collated batches, grouped by orientation."""
        order = np.arange(len(self.scenes))
        if shuffle:
            np.random.default_rng([self.seed, epoch]).shuffle(order)
        by_orient: dict[Orientation, list[int]] = {}
        for idx in order:
            o = Orientation(self.scenes[idx].orientation)
            by_orient.setdefault(o, []).append(int(idx))
        for indices in by_orient.values():
            for lo in range(0, len(indices), batch_size):
                chunk = indices[lo:lo + batch_size]
                yield self.collate([self.sample(i, epoch, augment) for i in chunk])

    @staticmethod
    def collate(samples: list[dict]) -> dict:
        batch = {
            "indices": [s["index"] for s in samples],
            "orientation": samples[0]["orientation"],
            "images": torch.from_numpy(np.stack([s["image"] for s in samples])),
            "gt_boxes": [torch.from_numpy(s["gt_boxes"]) for s in samples],
            "gt_scores": [torch.from_numpy(s["gt_scores"]) for s in samples],
        }
        if "canvas" in samples[0]:
            batch["canvases"] = torch.from_numpy(np.stack([s["canvas"] for s in samples]))
            batch["valid"] = torch.from_numpy(np.stack([s["valid"] for s in samples]))
        return batch
