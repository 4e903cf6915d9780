"""Matching and losses for set prediction of crops.

Predictions are matched one-to-one to ground truths by minimum-cost
bipartite assignment; only matched pairs contribute to the box regression
and GIoU terms, while all confidences are pulled toward soft targets by a
quality-focal term. The extrapolated tokens get their own regression loss
against stop-gradient teacher tokens.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn.functional as F
from scipy.optimize import linear_sum_assignment


@dataclass
class LossWeights:
    lambda_iou: float = 0.4
    lambda_focal: float = 0.1
    focal_gamma: float = 2.0
    extra_loss_type: str = "smooth-l1"   # smooth-l1 | mse | cosine | kl
    smooth_l1_delta: float = 1.0
    extra_weight: float = 1.0

    def __post_init__(self):
        if self.lambda_iou < 0 or self.lambda_focal < 0 or self.extra_weight < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class Assignment:
    """Injective pairing of prediction indices to ground-truth indices."""

    pairs: list[tuple[int, int]]
    unmatched: list[int] = field(default_factory=list)

    @property
    def pred_indices(self) -> list[int]:
        return [p for p, _ in self.pairs]

    @property
    def gt_indices(self) -> list[int]:
        return [g for _, g in self.pairs]


def box_cxcywh_to_xyxy(boxes: torch.Tensor) -> torch.Tensor:
    xy, wh = boxes[..., :2], boxes[..., 2:]
    return torch.cat([xy - wh / 2, xy + wh / 2], dim=-1)


def giou_pairs(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Elementwise generalized IoU between (k, 4) center-form boxes.

    Stays informative (negative) for disjoint boxes, which unbounded
    predictions can be."""
    xa = box_cxcywh_to_xyxy(a)
    xb = box_cxcywh_to_xyxy(b)
    area_a = (xa[..., 2] - xa[..., 0]) * (xa[..., 3] - xa[..., 1])
    area_b = (xb[..., 2] - xb[..., 0]) * (xb[..., 3] - xb[..., 1])
    lt = torch.maximum(xa[..., :2], xb[..., :2])
    rb = torch.minimum(xa[..., 2:], xb[..., 2:])
    wh = (rb - lt).clamp(min=0)
    inter = wh[..., 0] * wh[..., 1]
    union = area_a + area_b - inter
    iou = inter / union
    lt_e = torch.minimum(xa[..., :2], xb[..., :2])
    rb_e = torch.maximum(xa[..., 2:], xb[..., 2:])
    wh_e = rb_e - lt_e
    enclose = wh_e[..., 0] * wh_e[..., 1]
    return iou - (enclose - union) / enclose


def giou_matrix(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Pairwise GIoU between (n, 4) and (m, 4) center-form boxes."""
    return giou_pairs(a[:, None, :], b[None, :, :])


def match(
    pred_boxes: torch.Tensor,
    pred_conf: torch.Tensor,
    gt_boxes: torch.Tensor,
    weights: LossWeights | None = None,
) -> Assignment:
    """Minimum-cost bipartite assignment of predictions to ground truths.

    Cost per pair: mean-L1 box distance + lambda_iou * (1 - GIoU)
    + lambda_focal * (-confidence). Matches min(n, m) pairs.
    """
    if gt_boxes.numel() == 0:
        raise ValueError("match requires at least one ground-truth box")
    weights = weights or LossWeights()
    with torch.no_grad():
        cost_l1 = torch.cdist(pred_boxes, gt_boxes, p=1) / 4.0
        cost_iou = 1.0 - giou_matrix(pred_boxes, gt_boxes)
        cost = cost_l1 + weights.lambda_iou * cost_iou \
            - weights.lambda_focal * pred_conf[:, None]
        rows, cols = linear_sum_assignment(cost.cpu().numpy())
    pairs = sorted(zip(rows.tolist(), cols.tolist()))
    matched = {p for p, _ in pairs}
    unmatched = [i for i in range(pred_boxes.shape[0]) if i not in matched]
    return Assignment(pairs=pairs, unmatched=unmatched)


def make_soft_labels(
    assignment: Assignment,
    gt_scores: torch.Tensor,
    n_preds: int,
    mode: str = "quality",
    teacher_conf: torch.Tensor | None = None,
) -> torch.Tensor:
    """Confidence targets in [0, 1] for all predictions.

    quality: matched predictions get score / 5 (aesthetic 0-5 scale),
    unmatched get 0. self-distill: the EMA model's confidences on the same
    input are the targets.
    """
    if mode == "self-distill":
        if teacher_conf is None:
            raise ValueError("self-distill labels need teacher confidences")
        return teacher_conf.detach()
    if mode != "quality":
        raise ValueError(f"unknown label mode {mode!r}")
    if gt_scores.numel() and (gt_scores.min() < 0 or gt_scores.max() > 5):
        raise ValueError("quality labels expect scores in [0, 5]")
    targets = torch.zeros(n_preds, dtype=gt_scores.dtype, device=gt_scores.device)
    for p, g in assignment.pairs:
        targets[p] = gt_scores[g] / 5.0
    return targets


def quality_focal(pred_conf: torch.Tensor, targets: torch.Tensor,
                  gamma: float = 2.0) -> torch.Tensor:
    """Focal BCE against soft targets: |t - p|^gamma * BCE(p, t)."""
    p = pred_conf.clamp(1e-12, 1 - 1e-12)
    bce = -(targets * p.log() + (1 - targets) * (1 - p).log())
    return ((targets - pred_conf).abs() ** gamma * bce).mean()


def comp_loss(
    pred_boxes: torch.Tensor,
    pred_conf: torch.Tensor,
    gt_boxes: torch.Tensor,
    targets: torch.Tensor,
    assignment: Assignment,
    weights: LossWeights | None = None,
) -> tuple[torch.Tensor, dict[str, float]]:
    """Composition loss: L_reg + lambda_iou * L_IoU + lambda_focal * L_focal.

    Only matched pairs contribute to the regression and GIoU terms; the
    focal term covers every confidence. Raises on non-finite results.
    """
    weights = weights or LossWeights()
    pi = torch.as_tensor(assignment.pred_indices, dtype=torch.long, device=pred_boxes.device)
    gi = torch.as_tensor(assignment.gt_indices, dtype=torch.long, device=pred_boxes.device)
    matched_pred = pred_boxes[pi]
    matched_gt = gt_boxes[gi]
    l_reg = (matched_pred - matched_gt).abs().mean()
    l_iou = (1.0 - giou_pairs(matched_pred, matched_gt)).mean()
    l_focal = quality_focal(pred_conf, targets, weights.focal_gamma)
    total = l_reg + weights.lambda_iou * l_iou + weights.lambda_focal * l_focal
    if not torch.isfinite(total):
        raise RuntimeError(
            f"non-finite composition loss: reg={l_reg}, iou={l_iou}, focal={l_focal}"
        )
    return total, {
        "reg": float(l_reg.detach()),
        "iou": float(l_iou.detach()),
        "focal": float(l_focal.detach()),
    }


def extra_loss(
    z_pad: torch.Tensor,
    z_out: torch.Tensor,
    valid_mask: torch.Tensor | None = None,
    loss_type: str = "smooth-l1",
    delta: float = 1.0,
) -> torch.Tensor:
    """Extrapolation loss between predicted and teacher tokens.

    ``z_pad``/``z_out`` are (..., d); ``valid_mask`` selects cells with real
    teacher content. The teacher side is detached (stop gradient). Returns
    0 when no cell is valid.
    """
    if z_pad.shape != z_out.shape:
        raise ValueError(f"shape mismatch {tuple(z_pad.shape)} vs {tuple(z_out.shape)}")
    z_out = z_out.detach()
    if valid_mask is not None:
        z_pad = z_pad[valid_mask]
        z_out = z_out[valid_mask]
    if z_pad.numel() == 0:
        return torch.zeros((), dtype=z_pad.dtype, device=z_pad.device)
    if loss_type == "smooth-l1":
        d = (z_pad - z_out).abs()
        per = torch.where(d < delta, 0.5 * d * d / delta, d - 0.5 * delta)
        return per.mean()
    if loss_type == "mse":
        return ((z_pad - z_out) ** 2).mean()
    if loss_type == "cosine":
        cos = F.cosine_similarity(z_pad, z_out, dim=-1)
        return (1.0 - cos).mean()
    if loss_type == "kl":
        log_p = F.log_softmax(z_pad, dim=-1)
        q = F.softmax(z_out, dim=-1)
        return (q * (q.clamp_min(1e-12).log() - log_p)).sum(dim=-1).mean()
    raise ValueError(f"unknown extrapolation loss type {loss_type!r}")
