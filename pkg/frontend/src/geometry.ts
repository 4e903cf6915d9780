/**
 * Box geometry mirrored from the server.
 *
 * Boxes are [x, y, w, h] center form, normalized to some frame; values
 * outside [0, 1] describe regions beyond that frame. The transforms here
 * are the exact inverse pair used server-side — conformance vectors are
 * checked in tests/geometry.test.ts.
 */

export interface Box {
  x: number;
  y: number;
  w: number;
  h: number;
}

export type Orientation = "landscape" | "portrait";

export function box(x: number, y: number, w: number, h: number): Box {
  return { x, y, w, h };
}

export function fromList(v: number[]): Box {
  return { x: v[0], y: v[1], w: v[2], h: v[3] };
}

export function asList(b: Box): number[] {
  return [b.x, b.y, b.w, b.h];
}

export function corners(b: Box): [number, number, number, number] {
  return [b.x - b.w / 2, b.y - b.h / 2, b.x + b.w / 2, b.y + b.h / 2];
}

/** Express `b` in the normalized coordinates of `frame`. */
export function toFrame(b: Box, frame: Box): Box {
  const fx1 = frame.x - frame.w / 2;
  const fy1 = frame.y - frame.h / 2;
  return {
    x: (b.x - fx1) / frame.w,
    y: (b.y - fy1) / frame.h,
    w: b.w / frame.w,
    h: b.h / frame.h,
  };
}

/** Inverse of toFrame. */
export function fromFrame(b: Box, frame: Box): Box {
  const fx1 = frame.x - frame.w / 2;
  const fy1 = frame.y - frame.h / 2;
  return {
    x: fx1 + b.x * frame.w,
    y: fy1 + b.y * frame.h,
    w: b.w * frame.w,
    h: b.h * frame.h,
  };
}

export function iou(a: Box, b: Box): number {
  const [ax1, ay1, ax2, ay2] = corners(a);
  const [bx1, by1, bx2, by2] = corners(b);
  const iw = Math.min(ax2, bx2) - Math.max(ax1, bx1);
  const ih = Math.min(ay2, by2) - Math.max(ay1, by1);
  if (iw <= 0 || ih <= 0) return 0;
  const inter = iw * ih;
  const union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter;
  return inter / union;
}

/** Smallest box of aspect `ratio` (w/h) covering `crop`, same center. */
export function deriveViewWithRatio(crop: Box, ratio: number): Box {
  if (crop.w >= crop.h * ratio) {
    return { x: crop.x, y: crop.y, w: crop.w, h: crop.w / ratio };
  }
  return { x: crop.x, y: crop.y, w: crop.h * ratio, h: crop.h };
}

/**
 * Fit a view inside the unit world: translate when it fits, shrink
 * uniformly (aspect preserved) when oversized, then center that axis.
 */
export function clampToWorld(v: Box): Box {
  const scale = Math.max(v.w, v.h, 1);
  const w = v.w / scale;
  const h = v.h / scale;
  const slide = (c: number, extent: number) => {
    const half = extent / 2;
    return Math.min(Math.max(c, half), 1 - half);
  };
  return { x: slide(v.x, w), y: slide(v.y, h), w, h };
}

/** Camera aspect in world-normalized units (pixel ratio corrected by the
 * world's own aspect). */
export function cameraRatioNorm(orientation: Orientation, worldW: number, worldH: number): number {
  const px = orientation === "landscape" ? 4 / 3 : 3 / 4;
  return (px * worldH) / worldW;
}

/** Largest centered camera-ratio viewport. */
export function zoomToFit(orientation: Orientation, worldW: number, worldH: number): Box {
  const r = cameraRatioNorm(orientation, worldW, worldH);
  return clampToWorld(deriveViewWithRatio(box(0.5, 0.5, 1, 1), r));
}

export interface PixelRect {
  left: number;
  top: number;
  width: number;
  height: number;
}

/** World-normalized box to canvas pixels (canvas shows the whole world). */
export function worldToCanvas(b: Box, canvasW: number, canvasH: number): PixelRect {
  const [x1, y1, x2, y2] = corners(b);
  return {
    left: x1 * canvasW,
    top: y1 * canvasH,
    width: (x2 - x1) * canvasW,
    height: (y2 - y1) * canvasH,
  };
}

export function canvasToWorld(rect: PixelRect, canvasW: number, canvasH: number): Box {
  const w = rect.width / canvasW;
  const h = rect.height / canvasH;
  return { x: rect.left / canvasW + w / 2, y: rect.top / canvasH + h / 2, w, h };
}
