/** Overlay rectangle computation and canvas drawing. */

import { RecommendResponse } from "./api";
import { Box, PixelRect, fromFrame, fromList, worldToCanvas } from "./geometry";

/**
 * Pixel rectangle of a viewport-frame box (predicted view or crop) on the
 * world canvas: map through the viewport into world coordinates first.
 */
export function overlayRect(
  frameBox: Box,
  viewport: Box,
  canvasW: number,
  canvasH: number,
): PixelRect {
  return worldToCanvas(fromFrame(frameBox, viewport), canvasW, canvasH);
}

function strokeRect(ctx: CanvasRenderingContext2D, r: PixelRect): void {
  ctx.strokeRect(r.left, r.top, r.width, r.height);
}

export function drawViewportOverlay(
  ctx: CanvasRenderingContext2D,
  viewport: Box,
  canvasW: number,
  canvasH: number,
): void {
  ctx.save();
  ctx.strokeStyle = "#ffffff";
  ctx.lineWidth = 2;
  ctx.setLineDash([]);
  strokeRect(ctx, worldToCanvas(viewport, canvasW, canvasH));
  ctx.restore();
}

export function drawRecommendation(
  ctx: CanvasRenderingContext2D,
  resp: RecommendResponse,
  viewport: Box,
  canvasW: number,
  canvasH: number,
): void {
  ctx.save();
  // predicted view: solid
  ctx.strokeStyle = "#39d98a";
  ctx.lineWidth = 2;
  ctx.setLineDash([]);
  strokeRect(ctx, overlayRect(fromList(resp.view), viewport, canvasW, canvasH));
  // predicted crop: dashed red
  ctx.strokeStyle = "#ff4d4f";
  ctx.setLineDash([6, 4]);
  strokeRect(ctx, overlayRect(fromList(resp.crop), viewport, canvasW, canvasH));
  ctx.restore();
}
