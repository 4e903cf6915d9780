"""Exponential-moving-average teacher.

The teacher mirrors the student's parameters as a slow average, never
receives gradients, and supplies two kinds of supervision: encoded tokens
of the full scene (targets for the extrapolated ring) and its own
confidences (targets for self-distillation).
"""

from __future__ import annotations

import copy

import torch

from viewscout.model.network import CompositionNet


@torch.no_grad()
def ema_update(student: torch.nn.Module, teacher: torch.nn.Module, decay: float) -> None:
    """theta_T <- decay * theta_T + (1 - decay) * theta_S, elementwise."""
    s_params = dict(student.named_parameters())
    for name, p_t in teacher.named_parameters():
        p_s = s_params[name]
        if p_t.shape != p_s.shape:
            raise ValueError(f"shape mismatch for {name}: {p_t.shape} vs {p_s.shape}")
        p_t.mul_(decay).add_(p_s, alpha=1.0 - decay)
    s_buffers = dict(student.named_buffers())
    for name, b_t in teacher.named_buffers():
        b_t.copy_(s_buffers[name])


class EmaTeacher:
    """Frozen EMA copy of the model."""

    def __init__(self, model: CompositionNet, decay: float = 0.999):
        if not 0.0 <= decay <= 1.0:
            raise ValueError(f"decay must be in [0, 1], got {decay}")
        self.decay = decay
        self.model = copy.deepcopy(model)
        self.model.requires_grad_(False)
        self.model.eval()

    def update(self, student: CompositionNet) -> None:
        ema_update(student, self.model, self.decay)

    @torch.no_grad()
    def encode_tokens(self, images: torch.Tensor) -> torch.Tensor:
        """Tokens (B, R, C, D) of arbitrary stride-aligned input."""
        return self.model.encode(images).tokens

    @torch.no_grad()
    def confidences(self, images: torch.Tensor) -> torch.Tensor:
        preds, _ = self.model(images)
        return preds.confidences
