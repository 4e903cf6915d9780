"""Training loop: AdamW with split learning rates, staged soft-label
strategy (quality guidance then self-distillation), EMA teacher updates,
and the extrapolation loss on the padded ring."""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from viewscout.data.loader import SceneDataset
from viewscout.data.records import Scene
from viewscout.model.checkpoint import save_checkpoint
from viewscout.model.network import CompositionNet, ModelConfig
from viewscout.training.ema import EmaTeacher
from viewscout.training.losses import LossWeights, comp_loss, extra_loss, make_soft_labels, match


@dataclass
class TrainConfig:
    # model
    d_model: int = 128
    nhead: int = 4
    enc_layers: int = 4
    dec_layers: int = 4
    fem_blocks: int = 6
    ffn_dim: int = 256
    num_queries: int = 16
    stride: int = 16
    input_short: int = 96
    input_long: int = 128
    margin: int = -1                 # -1: auto from the grid size
    enable_fem: bool = True          # False: margin 0, no extrapolation loss
    # optimization
    epochs: int = 50
    batch_size: int = 16
    lr_transformer: float = 2e-4
    lr_backbone: float = 2e-5        # 10:1 transformer:backbone ratio
    weight_decay: float = 1e-4
    lr_drop_epoch: int = 30
    clip_grad: float = 1.0
    # losses and labels
    lambda_iou: float = 0.4
    lambda_focal: float = 0.1
    focal_gamma: float = 2.0
    extra_loss_type: str = "smooth-l1"
    smooth_l1_delta: float = 1.0
    extra_weight: float = 1.0
    label_switch_epoch: int = 30     # quality guidance before, self-distill after
    # averaging horizon ~200 steps; desk-scale runs are only a few thousand
    # steps, so a slower teacher would stay stale for the whole run
    ema_decay: float = 0.995
    # data
    augment: bool = True
    color_jitter: float = 0.2
    view_jitter: float = 0.04
    reframe_prob: float = 0.3    # train on framings near the best view too
    seed: int = 0
    eval_scenes: int = 64

    def model_config(self) -> ModelConfig:
        cfg = ModelConfig(
            d_model=self.d_model,
            nhead=self.nhead,
            enc_layers=self.enc_layers,
            dec_layers=self.dec_layers,
            fem_blocks=self.fem_blocks,
            ffn_dim=self.ffn_dim,
            num_queries=self.num_queries,
            stride=self.stride,
            input_short=self.input_short,
            input_long=self.input_long,
            margin=self.margin,
        )
        if not self.enable_fem:
            cfg.margin = 0
        return cfg

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            lambda_iou=self.lambda_iou,
            lambda_focal=self.lambda_focal,
            focal_gamma=self.focal_gamma,
            extra_loss_type=self.extra_loss_type,
            smooth_l1_delta=self.smooth_l1_delta,
            extra_weight=self.extra_weight,
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "TrainConfig":
        """Parse a plain-text ``key = value`` config file ('#' comments)."""
        values = {}
        fields = {f.name: f.type for f in dataclasses.fields(cls)}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in fields:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _parse_value(value, fields[key])
        return cls(**values)

    def to_file(self, path: str | Path) -> None:
        lines = [f"{f.name} = {getattr(self, f.name)}" for f in dataclasses.fields(self)]
        Path(path).write_text("\n".join(lines) + "\n")


def _parse_value(text: str, type_name):
    name = type_name if isinstance(type_name, str) else getattr(type_name, "__name__", "str")
    if name == "bool":
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"not a bool: {text!r}")
    if name == "int":
        return int(text)
    if name == "float":
        return float(text)
    return text


def _batch_comp_loss(preds, batch, weights, mode, teacher_conf):
    """Average composition loss over a batch; returns (loss, components)."""
    total = 0.0
    comps = {"reg": 0.0, "iou": 0.0, "focal": 0.0}
    b = preds.boxes.shape[0]
    for i in range(b):
        gt_boxes = batch["gt_boxes"][i]
        gt_scores = batch["gt_scores"][i]
        assignment = match(preds.boxes[i].detach(), preds.confidences[i].detach(),
                           gt_boxes, weights)
        targets = make_soft_labels(
            assignment, gt_scores, preds.boxes.shape[1], mode,
            teacher_conf[i] if teacher_conf is not None else None,
        )
        loss_i, comp_i = comp_loss(preds.boxes[i], preds.confidences[i],
                                   gt_boxes, targets, assignment, weights)
        total = total + loss_i
        for k in comps:
            comps[k] += comp_i[k] / b
    return total / b, comps


def train(
    config: TrainConfig,
    scenes: list[Scene],
    root: str | Path,
    eval_scenes: list[Scene] | None = None,
    eval_root: str | Path | None = None,
    out_ckpt: str | Path | None = None,
    log_path: str | Path | None = None,
    progress: bool = False,
) -> tuple[CompositionNet, list[dict]]:
    """Train on scenes; returns the model and per-epoch history.

    Deterministic for a given config+seed. A non-finite loss aborts after
    writing the last finished epoch's checkpoint.
    """
    if not scenes:
        raise ValueError("training dataset is empty")
    torch.manual_seed(config.seed)
    model = CompositionNet(config.model_config())
    teacher = EmaTeacher(model, config.ema_decay)
    weights = config.loss_weights()
    use_fem = model.config.margin > 0

    backbone_params = [p for n, p in model.named_parameters() if n.startswith("backbone")]
    other_params = [p for n, p in model.named_parameters() if not n.startswith("backbone")]
    optimizer = torch.optim.AdamW(
        [
            {"params": backbone_params, "lr": config.lr_backbone},
            {"params": other_params, "lr": config.lr_transformer},
        ],
        weight_decay=config.weight_decay,
    )

    dataset = SceneDataset(
        scenes, root, model.config,
        augment=config.augment,
        color_jitter=config.color_jitter,
        view_jitter=config.view_jitter,
        reframe_prob=config.reframe_prob,
        seed=config.seed,
    )
    if eval_scenes is None:
        eval_scenes = scenes[: config.eval_scenes]
        eval_root = root
    log_file = None
    if log_path is not None:
        Path(log_path).parent.mkdir(parents=True, exist_ok=True)
        log_file = open(log_path, "w", encoding="utf-8")

    history: list[dict] = []
    last_good: dict | None = None
    try:
        for epoch in range(config.epochs):
            lr_scale = 0.1 if epoch >= config.lr_drop_epoch else 1.0
            optimizer.param_groups[0]["lr"] = config.lr_backbone * lr_scale
            optimizer.param_groups[1]["lr"] = config.lr_transformer * lr_scale
            mode = "quality" if epoch < config.label_switch_epoch else "self-distill"

            model.train()
            sums = {"comp": 0.0, "reg": 0.0, "iou": 0.0, "focal": 0.0, "extra": 0.0}
            n_batches = 0
            t0 = time.perf_counter()
            for batch in dataset.batches(epoch, config.batch_size):
                preds, grid = model(batch["images"])
                teacher_conf = None
                if mode == "self-distill":
                    teacher_conf = teacher.confidences(batch["images"])
                l_comp, comps = _batch_comp_loss(preds, batch, weights, mode, teacher_conf)

                if use_fem:
                    z_teacher = teacher.encode_tokens(batch["canvases"])
                    ring = ~grid.visible
                    mask = ring[None, :, :] & batch["valid"]
                    l_extra = extra_loss(grid.tokens, z_teacher, mask,
                                         weights.extra_loss_type, weights.smooth_l1_delta)
                else:
                    l_extra = torch.zeros(())
                loss = l_comp + weights.extra_weight * l_extra
                if not torch.isfinite(loss):
                    raise RuntimeError("non-finite total loss")

                optimizer.zero_grad()
                loss.backward()
                if config.clip_grad > 0:
                    torch.nn.utils.clip_grad_norm_(model.parameters(), config.clip_grad)
                optimizer.step()
                teacher.update(model)

                sums["comp"] += float(l_comp.detach())
                sums["extra"] += float(l_extra.detach())
                for k in ("reg", "iou", "focal"):
                    sums[k] += comps[k]
                n_batches += 1

            entry = {
                "epoch": epoch,
                "L_comp": sums["comp"] / n_batches,
                "L_reg": sums["reg"] / n_batches,
                "L_IoU": sums["iou"] / n_batches,
                "L_focal": sums["focal"] / n_batches,
                "L_extra": sums["extra"] / n_batches,
                "label_mode": mode,
                "seconds": time.perf_counter() - t0,
            }
            if eval_scenes:
                from viewscout.metrics import evaluate

                report = evaluate(model, eval_scenes, eval_root, mode="crop")
                entry["eval"] = {
                    "mean_iou": report.mean_iou,
                    "mean_disp": report.mean_disp,
                    "acc_1_5_e85": report.acc_1_5_e85,
                }
            history.append(entry)
            last_good = {k: v.detach().clone() for k, v in model.state_dict().items()}
            if log_file:
                log_file.write(json.dumps(entry) + "\n")
                log_file.flush()
            if progress:
                msg = (f"epoch {epoch}: comp {entry['L_comp']:.4f} "
                       f"extra {entry['L_extra']:.4f} [{entry['seconds']:.0f}s]")
                if "eval" in entry:
                    msg += f" eval IoU {entry['eval']['mean_iou']:.3f}"
                print(msg, flush=True)
    except RuntimeError:
        if last_good is not None and out_ckpt is not None:
            model.load_state_dict(last_good)
            save_checkpoint(model, out_ckpt, extra={"history": history, "aborted": True})
        raise
    finally:
        if log_file:
            log_file.close()

    model.eval()
    if out_ckpt is not None:
        save_checkpoint(model, out_ckpt, extra={"history": history})
    return model, history
