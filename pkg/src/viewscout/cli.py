"""Command-line entry points; thin wrappers over the library and service."""

from __future__ import annotations

import json
from pathlib import Path

import click
import cv2
import numpy as np

from viewscout.boxes import Box, Orientation


@click.group()
def main():
    """Camera view and crop recommendation tools."""


@main.command("make-synthetic")
@click.option("--count", "-n", type=int, required=True, help="number of scenes")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="output directory")
def make_synthetic_cmd(count: int, seed: int, out: str):
    """Generate oracle-labeled synthetic scenes (images/ + scenes.jsonl)."""
    from viewscout.data.records import unbounded_fraction
    from viewscout.data.synthetic import build_synthetic_dataset

    scenes = build_synthetic_dataset(count, seed, out)
    frac = unbounded_fraction(scenes)
    click.echo(f"wrote {len(scenes)} scenes to {out} "
               f"(crops beyond the frame: {100 * frac:.1f}%)")


@main.command("build-dataset")
@click.option("--input", "input_dir", type=click.Path(exists=True), required=True,
              help="directory of images with <name>.json crop annotations")
@click.option("--kind", type=click.Choice(["gaicd", "cpc"]), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="output scenes.jsonl")
def build_dataset_cmd(input_dir: str, kind: str, seed: int, out: str):
    """Convert grid-annotated cropping data into unbounded scenes.

    Each image <name>.<ext> needs a sidecar <name>.json of the form
    {"crops": [{"box": [x, y, w, h] (absolute px, center form), "score": s}]}.
    """
    from viewscout.data.records import CropAnnotation, save_scenes
    from viewscout.data.sampling import InfeasibleSampleError, convert_sample

    source_kind = f"{kind}-style"
    root = Path(input_dir)
    scenes = []
    skipped = 0
    images = sorted(p for p in root.iterdir()
                    if p.suffix.lower() in (".jpg", ".jpeg", ".png"))
    for i, img_path in enumerate(images):
        sidecar = img_path.with_suffix(".json")
        if not sidecar.exists():
            click.echo(f"skipping {img_path.name}: no annotation file", err=True)
            skipped += 1
            continue
        ann = json.loads(sidecar.read_text())
        crops = [CropAnnotation(Box.from_list(c["box"]), float(c["score"]))
                 for c in ann["crops"]]
        img = cv2.imread(str(img_path))
        if img is None:
            click.echo(f"skipping {img_path.name}: unreadable image", err=True)
            skipped += 1
            continue
        h, w = img.shape[:2]
        try:
            scene = convert_sample(str(img_path), w, h, crops, source_kind,
                                   rng_seed=seed ^ i)
        except (InfeasibleSampleError, ValueError) as err:
            click.echo(f"skipping {img_path.name}: {err}", err=True)
            skipped += 1
            continue
        scenes.append(scene)
    save_scenes(out, scenes)
    click.echo(f"wrote {len(scenes)} scenes to {out} ({skipped} skipped)")


@main.command("train")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="plain-text key = value training config")
@click.option("--data", type=click.Path(exists=True), required=True,
              help="training scenes.jsonl")
@click.option("--eval-data", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None, help="override the config seed")
@click.option("--out", type=click.Path(), required=True, help="output checkpoint")
@click.option("--log", type=click.Path(), default=None, help="JSONL training log")
def train_cmd(config_path, data, eval_data, seed, out, log):
    """Train the recommendation model."""
    from viewscout.data.records import load_scenes
    from viewscout.training.loop import TrainConfig, train

    cfg = TrainConfig.from_file(config_path) if config_path else TrainConfig()
    if seed is not None:
        cfg.seed = seed
    scenes = load_scenes(data)
    eval_scenes = load_scenes(eval_data) if eval_data else None
    _, history = train(
        cfg, scenes, Path(data).parent,
        eval_scenes=eval_scenes,
        eval_root=Path(eval_data).parent if eval_data else None,
        out_ckpt=out, log_path=log, progress=True,
    )
    final = history[-1]
    click.echo(f"finished {len(history)} epochs; final L_comp {final['L_comp']:.4f}; "
               f"checkpoint at {out}")


@main.command("eval")
@click.option("--ckpt", type=click.Path(exists=True), required=True)
@click.option("--data", type=click.Path(exists=True), required=True)
@click.option("--mode", type=click.Choice(["view", "crop"]), default="view",
              show_default=True)
@click.option("--out", type=click.Path(), default=None, help="report JSON path")
def eval_cmd(ckpt, data, mode, out):
    """Evaluate a checkpoint: Acc_{K/N}, mean IoU, mean Disp."""
    from viewscout.data.records import load_scenes
    from viewscout.metrics import evaluate
    from viewscout.model.checkpoint import load_checkpoint

    model = load_checkpoint(ckpt)
    scenes = load_scenes(data)
    report = evaluate(model, scenes, Path(data).parent, mode=mode)
    summary = {k: v for k, v in report.to_json().items() if k != "per_image"}
    click.echo(json.dumps(summary, indent=2))
    if out:
        Path(out).write_text(json.dumps(report.to_json(), indent=2))
        click.echo(f"full report written to {out}")


def _parse_viewport(text: str) -> Box:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise click.BadParameter("viewport must be x,y,w,h")
    return Box(*parts)


@main.command("recommend")
@click.option("--ckpt", type=click.Path(exists=True), required=True)
@click.option("--image", "image_path", type=click.Path(exists=True), required=True)
@click.option("--viewport", default=None,
              help="world-normalized x,y,w,h; default: largest centered view")
@click.option("--orientation", type=click.Choice(["landscape", "portrait"]),
              default="landscape", show_default=True)
@click.option("--steps", type=int, default=3, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="trajectory JSON path")
def recommend_cmd(ckpt, image_path, viewport, orientation, steps, out):
    """Run multi-step view adjustment on one image."""
    from viewscout.advisor import ViewAdvisor
    from viewscout.boxes import clamp_to_world, derive_view_with_ratio
    from viewscout.model.checkpoint import load_checkpoint

    img = cv2.imread(image_path)
    if img is None:
        raise click.ClickException(f"cannot read {image_path}")
    world = cv2.cvtColor(img, cv2.COLOR_BGR2RGB)
    orient = Orientation(orientation)
    if viewport is None:
        h, w = world.shape[:2]
        # largest centered camera-ratio viewport (world-normalized units
        # are per-axis, so scale the pixel ratio by the world's)
        ratio_norm = orient.ratio * h / w
        vp = clamp_to_world(derive_view_with_ratio(Box(0.5, 0.5, 1.0, 1.0), ratio_norm))
    else:
        vp = _parse_viewport(viewport)
    advisor = ViewAdvisor(load_checkpoint(ckpt))
    trajectory = advisor.run_multistep(world, vp, orient, max_steps=steps)
    payload = {"image": image_path, "steps": [s.to_json() for s in trajectory]}
    last = trajectory[-1]
    click.echo(f"{len(trajectory)} step(s); converged={last.recommendation.converged}")
    for op in trajectory[0].recommendation.operations:
        click.echo(f"  step 1 op: {op.kind} {op.amount:.3f}")
    if out:
        Path(out).write_text(json.dumps(payload, indent=2))
        click.echo(f"trajectory written to {out}")


@main.command("serve")
@click.option("--ckpt", type=click.Path(exists=True), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--frontend", type=click.Path(), default=None,
              help="static UI bundle directory to mount at /")
def serve_cmd(ckpt, host, port, frontend):
    """Serve the session API (and optional UI) over HTTP."""
    import uvicorn

    from viewscout.service.app import create_app

    app = create_app(ckpt, frontend_dir=frontend)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
