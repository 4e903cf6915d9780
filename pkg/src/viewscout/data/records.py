"""Scene records and JSONL persistence.

A Scene couples a world image with one sampled camera placement
(``init_view``, absolute pixels) and the ground-truth crops re-expressed in
the init-view frame, where coordinates outside [0, 1] mark content beyond
the captured frame.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from viewscout.boxes import Box, Orientation, from_frame, iou

# construction constraints for init views
SCALE_FLOOR = 0.7          # min init-view side as a fraction of the world side
IOU_FLOOR = 0.7            # min IoU between init view and the best ground truth
RATIO_TOL_PX = 1.0         # allowed deviation from 4:3 / 3:4, in pixels


@dataclass
class CropAnnotation:
    """One ground-truth crop with its aesthetic score."""

    box: Box
    score: float

    def to_json(self) -> dict:
        return {"box": self.box.as_list(), "score": self.score}

    @classmethod
    def from_json(cls, d: dict) -> "CropAnnotation":
        return cls(Box.from_list(d["box"]), float(d["score"]))


@dataclass
class SceneOracle:
    """Closed-form description of the best crop of a synthetic scene."""

    crop: Box                      # world-normalized best crop
    object_box: Box                # world-normalized salient-object bounding box
    thirds_point: tuple[float, float]   # which thirds intersection holds the object
    object_kind: str = "ellipse"

    def to_json(self) -> dict:
        return {
            "crop": self.crop.as_list(),
            "object_box": self.object_box.as_list(),
            "thirds_point": list(self.thirds_point),
            "object_kind": self.object_kind,
        }

    @classmethod
    def from_json(cls, d: dict) -> "SceneOracle":
        return cls(
            Box.from_list(d["crop"]),
            Box.from_list(d["object_box"]),
            (float(d["thirds_point"][0]), float(d["thirds_point"][1])),
            d.get("object_kind", "ellipse"),
        )


@dataclass
class Scene:
    """World image plus init-view placement and init-frame ground truths."""

    image: str                     # path to the world image
    width: int                     # world pixels
    height: int
    init_view: Box                 # absolute px, center form, world frame
    orientation: Orientation
    crops: list[CropAnnotation] = field(default_factory=list)  # init-frame normalized
    source: str = "synthetic"      # gaicd-style | cpc-style | synthetic
    oracle: SceneOracle | None = None

    def init_view_normalized(self) -> Box:
        """Init view in world-normalized coordinates."""
        return Box(
            self.init_view.x / self.width,
            self.init_view.y / self.height,
            self.init_view.w / self.width,
            self.init_view.h / self.height,
        )

    def best_crop(self) -> CropAnnotation:
        """Highest-scored crop; first in file order wins ties."""
        best = self.crops[0]
        for c in self.crops[1:]:
            if c.score > best.score:
                best = c
        return best

    def validate(self) -> None:
        """Re-check the construction constraints; raises ValueError on breach."""
        from viewscout.data.sampling import SCORE_THRESHOLDS

        v = self.init_view
        if v.h < SCALE_FLOOR * self.height - 1e-6 or v.w < SCALE_FLOOR * self.width - 1e-6:
            raise ValueError(f"init view below scale floor: {v} in {self.width}x{self.height}")
        ratio = Orientation(self.orientation).ratio
        if abs(v.w - ratio * v.h) > RATIO_TOL_PX + 1e-9:
            raise ValueError(f"init view ratio off by more than {RATIO_TOL_PX}px: {v}")
        if not self.crops:
            raise ValueError("scene has no ground-truth crops")
        threshold = SCORE_THRESHOLDS[self.source]
        for c in self.crops:
            if not c.score > threshold:
                raise ValueError(f"crop score {c.score} not above {threshold} for {self.source}")
        best_world = from_frame(self.best_crop().box, self.init_view_normalized())
        if iou(self.init_view_normalized(), best_world) < IOU_FLOOR - 1e-6:
            raise ValueError("init view IoU with best ground truth below floor")

    def to_json(self) -> dict:
        d = {
            "image": self.image,
            "width": self.width,
            "height": self.height,
            "init_view": self.init_view.as_list(),
            "orientation": Orientation(self.orientation).value,
            "crops": [c.to_json() for c in self.crops],
            "source": self.source,
        }
        if self.oracle is not None:
            d["oracle"] = self.oracle.to_json()
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Scene":
        return cls(
            image=d["image"],
            width=int(d["width"]),
            height=int(d["height"]),
            init_view=Box.from_list(d["init_view"]),
            orientation=Orientation(d["orientation"]),
            crops=[CropAnnotation.from_json(c) for c in d["crops"]],
            source=d["source"],
            oracle=SceneOracle.from_json(d["oracle"]) if "oracle" in d else None,
        )


def save_scenes(path: str | Path, scenes: list[Scene]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for scene in scenes:
            f.write(json.dumps(scene.to_json()) + "\n")


def load_scenes(path: str | Path, validate: bool = True) -> list[Scene]:
    scenes = []
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            scene = Scene.from_json(json.loads(line))
            if validate:
                scene.validate()
            scenes.append(scene)
    return scenes


def unbounded_fraction(scenes: list[Scene]) -> float:
    """Fraction of ground-truth crops extending beyond the init frame."""
    total = 0
    outside = 0
    for scene in scenes:
        for c in scene.crops:
            total += 1
            x1, y1, x2, y2 = c.box.corners
            if x1 < 0 or y1 < 0 or x2 > 1 or y2 > 1:
                outside += 1
    return outside / total if total else 0.0
