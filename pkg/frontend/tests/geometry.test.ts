import { describe, expect, it } from "vitest";

import {
  box,
  canvasToWorld,
  clampToWorld,
  corners,
  deriveViewWithRatio,
  fromFrame,
  fromList,
  iou,
  toFrame,
  worldToCanvas,
  zoomToFit,
} from "../src/geometry";
import vectors from "./fixtures/geometry_vectors.json";

const close = (got: number[], want: number[], tol = 1e-9) => {
  for (let i = 0; i < want.length; i++) {
    expect(Math.abs(got[i] - want[i])).toBeLessThanOrEqual(tol);
  }
};

describe("server conformance vectors", () => {
  it("matches to_frame / from_frame", () => {
    for (const v of vectors.frames) {
      const b = fromList(v.box);
      const f = fromList(v.frame);
      close(Object.values(toFrame(b, f)) as number[], v.to_frame);
      close(Object.values(fromFrame(b, f)) as number[], v.from_frame);
    }
  });

  it("matches overlay pixel rectangles within 1 px", () => {
    for (const v of vectors.overlays) {
      const r = worldToCanvas(fromList(v.box), v.canvas[0], v.canvas[1]);
      close([r.left, r.top, r.width, r.height], v.rect, 1.0);
    }
  });

  it("matches clamp_to_world", () => {
    for (const v of vectors.clamps) {
      const got = clampToWorld(fromList(v.box));
      close(Object.values(got) as number[], v.clamped);
    }
  });

  it("matches derive_view ratios", () => {
    for (const v of vectors.views) {
      const got = deriveViewWithRatio(fromList(v.crop), v.ratio);
      close(Object.values(got) as number[], v.view);
    }
  });

  it("matches iou", () => {
    for (const v of vectors.ious) {
      expect(Math.abs(iou(fromList(v.a), fromList(v.b)) - v.iou)).toBeLessThanOrEqual(1e-9);
    }
  });
});

describe("transform properties", () => {
  it("toFrame and fromFrame are exact inverses", () => {
    const f = box(0.4, 0.6, 0.5, 0.3);
    const b = box(0.2, 0.9, 0.7, 0.4);
    const round = fromFrame(toFrame(b, f), f);
    close(Object.values(round) as number[], Object.values(b) as number[], 1e-12);
  });

  it("canvasToWorld inverts worldToCanvas", () => {
    const b = box(0.3, 0.7, 0.4, 0.2);
    const round = canvasToWorld(worldToCanvas(b, 800, 600), 800, 600);
    close(Object.values(round) as number[], Object.values(b) as number[], 1e-12);
  });

  it("zoomToFit yields the largest centered camera-ratio viewport", () => {
    const vp = zoomToFit("landscape", 512, 512);
    expect(vp.x).toBeCloseTo(0.5, 12);
    expect(vp.y).toBeCloseTo(0.5, 12);
    expect(vp.w).toBeCloseTo(1.0, 12);       // 4:3 on a square world: full width
    expect(vp.h).toBeCloseTo(0.75, 12);
    const [x1, y1, x2, y2] = corners(vp);
    expect(x1).toBeGreaterThanOrEqual(0);
    expect(y1).toBeGreaterThanOrEqual(0);
    expect(x2).toBeLessThanOrEqual(1);
    expect(y2).toBeLessThanOrEqual(1);
  });
});
