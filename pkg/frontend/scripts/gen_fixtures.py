"""Regenerate the geometry conformance fixtures from the server-side math.

Run from the repo root: python3 frontend/scripts/gen_fixtures.py
"""

import json
from pathlib import Path

import numpy as np

from viewscout.boxes import Box, clamp_to_world, derive_view_with_ratio, from_frame, iou, to_frame


def box_list(b: Box) -> list[float]:
    return b.as_list()


def main() -> None:
    rng = np.random.default_rng(2024)
    frames = []
    for _ in range(40):
        frame = Box(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7),
                    rng.uniform(0.3, 0.9), rng.uniform(0.3, 0.9))
        box = Box(rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0),
                  rng.uniform(0.1, 1.2), rng.uniform(0.1, 1.2))
        frames.append({
            "box": box_list(box),
            "frame": box_list(frame),
            "to_frame": box_list(to_frame(box, frame)),
            "from_frame": box_list(from_frame(box, frame)),
        })

    overlays = []
    for cw, ch in ((800, 600), (1024, 768), (640, 480), (333, 500)):
        for _ in range(10):
            box = Box(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9),
                      rng.uniform(0.1, 1.1), rng.uniform(0.1, 1.1))
            x1, y1, x2, y2 = box.corners
            overlays.append({
                "box": box_list(box),
                "canvas": [cw, ch],
                "rect": [x1 * cw, y1 * ch, (x2 - x1) * cw, (y2 - y1) * ch],
            })

    clamps = []
    for _ in range(30):
        box = Box(rng.uniform(-0.3, 1.3), rng.uniform(-0.3, 1.3),
                  rng.uniform(0.2, 1.6), rng.uniform(0.2, 1.6))
        clamps.append({"box": box_list(box), "clamped": box_list(clamp_to_world(box))})

    views = []
    for _ in range(30):
        crop = Box(rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0),
                   rng.uniform(0.1, 1.2), rng.uniform(0.1, 1.2))
        ratio = float(rng.choice([4 / 3, 3 / 4, 1.0]))
        views.append({
            "crop": box_list(crop),
            "ratio": ratio,
            "view": box_list(derive_view_with_ratio(crop, ratio)),
        })

    ious = []
    for _ in range(30):
        a = Box(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0.1, 1), rng.uniform(0.1, 1))
        b = Box(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0.1, 1), rng.uniform(0.1, 1))
        ious.append({"a": box_list(a), "b": box_list(b), "iou": iou(a, b)})

    payload = {
        "frames": frames,
        "overlays": overlays,
        "clamps": clamps,
        "views": views,
        "ious": ious,
    }
    out = Path(__file__).parent.parent / "tests" / "fixtures" / "geometry_vectors.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, indent=1))
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
