"""Evaluation metrics: Acc_{K/N} at IoU thresholds, mean IoU and Disp
against the best-scored ground truth."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from viewscout.boxes import Box, Orientation, derive_view, disp, iou
from viewscout.data.loader import SceneDataset
from viewscout.data.records import Scene

EPSILONS = (0.90, 0.85)


@dataclass
class MetricsReport:
    acc_1_5_e90: float = 0.0
    acc_1_5_e85: float = 0.0
    acc_1_10_e90: float = 0.0
    acc_1_10_e85: float = 0.0
    mean_iou: float = 0.0
    mean_disp: float = 0.0
    per_image: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "acc_1_5_e90": self.acc_1_5_e90,
            "acc_1_5_e85": self.acc_1_5_e85,
            "acc_1_10_e90": self.acc_1_10_e90,
            "acc_1_10_e85": self.acc_1_10_e85,
            "mean_iou": self.mean_iou,
            "mean_disp": self.mean_disp,
            "per_image": self.per_image,
        }


def acc_k_n(pred_boxes: list[Box], gt_boxes: list[Box], k: int, n: int,
            epsilon: float) -> int:
    """1 iff any of the top-K predictions matches (IoU >= epsilon) any of
    the top-N ground truths. Both lists must be rank-ordered. N is
    truncated to the available ground truths."""
    if k < 1:
        raise ValueError("K must be at least 1")
    if not gt_boxes:
        raise ValueError("need at least one ground truth")
    for p in pred_boxes[:k]:
        for g in gt_boxes[:n]:
            if iou(p, g) >= epsilon:
                return 1
    return 0


def _as_views(boxes: list[Box], orientation: Orientation, mode: str) -> list[Box]:
    if mode == "crop":
        return boxes
    if mode == "view":
        return [derive_view(b, orientation) for b in boxes]
    raise ValueError(f"unknown eval mode {mode!r}")


def compute_metrics(
    predictions: list[tuple[np.ndarray, np.ndarray]],
    scenes: list[Scene],
    mode: str = "view",
) -> MetricsReport:
    """Aggregate metrics from per-scene (boxes (n,4), confidences (n,)).

    Predictions are ranked by confidence, ground truths by score (first in
    file order wins ties); ``view`` mode compares derived camera views,
    ``crop`` mode compares the crops directly.
    """
    if len(predictions) != len(scenes):
        raise ValueError("one prediction set per scene required")
    report = MetricsReport()
    accs = {(n, e): [] for n in (5, 10) for e in EPSILONS}
    ious, disps = [], []
    for (boxes, conf), scene in zip(predictions, scenes):
        order = np.argsort(-np.asarray(conf), kind="stable")
        pred_ranked = [Box.from_list(boxes[i]) for i in order]
        gt_sorted = sorted(
            range(len(scene.crops)), key=lambda i: (-scene.crops[i].score, i)
        )
        gt_ranked = [scene.crops[i].box for i in gt_sorted]

        orientation = Orientation(scene.orientation)
        pred_cmp = _as_views(pred_ranked, orientation, mode)
        gt_cmp = _as_views(gt_ranked, orientation, mode)

        record = {"scene": scene.image}
        for n in (5, 10):
            for e in EPSILONS:
                v = acc_k_n(pred_cmp, gt_cmp, 1, n, e)
                accs[(n, e)].append(v)
                record[f"acc_1_{n}_e{int(e * 100)}"] = v
        record["iou"] = iou(pred_cmp[0], gt_cmp[0])
        record["disp"] = disp(pred_cmp[0], gt_cmp[0])
        ious.append(record["iou"])
        disps.append(record["disp"])
        report.per_image.append(record)

    report.acc_1_5_e90 = 100.0 * float(np.mean(accs[(5, 0.90)]))
    report.acc_1_5_e85 = 100.0 * float(np.mean(accs[(5, 0.85)]))
    report.acc_1_10_e90 = 100.0 * float(np.mean(accs[(10, 0.90)]))
    report.acc_1_10_e85 = 100.0 * float(np.mean(accs[(10, 0.85)]))
    report.mean_iou = float(np.mean(ious))
    report.mean_disp = float(np.mean(disps))
    return report


def predict_scenes(model, scenes: list[Scene], root,
                   batch_size: int = 16) -> list[tuple[np.ndarray, np.ndarray]]:
    """Run the model over scenes (no augmentation); order follows input."""
    dataset = SceneDataset(scenes, root, model.config, augment=False)
    out: list = [None] * len(scenes)
    for batch in dataset.batches(epoch=0, batch_size=batch_size, shuffle=False):
        preds = model.predict(batch["images"])
        for row, idx in enumerate(batch["indices"]):
            out[idx] = (
                preds.boxes[row].numpy().astype(np.float64),
                preds.confidences[row].numpy().astype(np.float64),
            )
    return out


def evaluate(model, scenes: list[Scene], root, mode: str = "view",
             batch_size: int = 16) -> MetricsReport:
    """Forward the model over a dataset and aggregate the standard metrics."""
    if not scenes:
        raise ValueError("dataset is empty")
    predictions = predict_scenes(model, scenes, root, batch_size)
    return compute_metrics(predictions, scenes, mode)


def mean_iou_to_oracle(predictions, scenes) -> float:
    """Mean IoU of the top-confidence crop to the synthetic oracle crop,
    measured in the init frame."""
    from viewscout.boxes import to_frame

    vals = []
    for (boxes, conf), scene in zip(predictions, scenes):
        top = Box.from_list(boxes[int(np.argmax(conf))])
        oracle_init = to_frame(scene.oracle.crop, scene.init_view_normalized())
        vals.append(iou(top, oracle_init))
    return float(np.mean(vals))
