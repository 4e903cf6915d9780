from viewscout.model.network import (
    CompositionNet,
    ModelConfig,
    PredictionSet,
    TokenGrid,
    sine_embed,
)
from viewscout.model.checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "CompositionNet",
    "ModelConfig",
    "PredictionSet",
    "TokenGrid",
    "sine_embed",
    "load_checkpoint",
    "save_checkpoint",
]
