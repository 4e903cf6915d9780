from viewscout.training.losses import (
    Assignment,
    LossWeights,
    comp_loss,
    extra_loss,
    giou_pairs,
    make_soft_labels,
    match,
)
from viewscout.training.ema import EmaTeacher, ema_update
from viewscout.training.loop import TrainConfig, train

__all__ = [
    "Assignment",
    "LossWeights",
    "comp_loss",
    "extra_loss",
    "giou_pairs",
    "make_soft_labels",
    "match",
    "EmaTeacher",
    "ema_update",
    "TrainConfig",
    "train",
]
