"""Self-describing model checkpoints."""

from __future__ import annotations

from pathlib import Path

import torch

from viewscout.model.network import CompositionNet, ModelConfig

CHECKPOINT_VERSION = "unic-v1"


def save_checkpoint(model: CompositionNet, path: str | Path, extra: dict | None = None) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "state_dict": model.state_dict(),
    }
    if extra:
        payload["extra"] = extra
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_checkpoint(path: str | Path) -> CompositionNet:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(
            f"unsupported checkpoint version {payload.get('version')!r} in {path}"
        )
    model = CompositionNet(ModelConfig(**payload["config"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
