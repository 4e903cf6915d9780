/**
 * UI session state machine.
 *
 * Phases: framing -> recommended -> applied (repeatable) -> converged.
 * Converged only exits by re-framing. Gesture edits always preserve the
 * selected camera aspect exactly and keep the viewport inside the world.
 */

import { RecommendResponse } from "./api";
import {
  Box,
  Orientation,
  cameraRatioNorm,
  clampToWorld,
  deriveViewWithRatio,
  fromList,
  zoomToFit,
} from "./geometry";

export type Phase = "framing" | "recommended" | "applied" | "converged";

export class UiSession {
  phase: Phase = "framing";
  viewport: Box;
  orientation: Orientation = "landscape";
  lastResponse: RecommendResponse | null = null;
  private history: Box[] = [];

  constructor(
    public sessionId: string,
    public worldW: number,
    public worldH: number,
  ) {
    this.viewport = zoomToFit(this.orientation, worldW, worldH);
  }

  get historyLength(): number {
    return this.history.length;
  }

  get canApply(): boolean {
    return this.phase === "recommended" && this.lastResponse !== null
      && !this.lastResponse.converged;
  }

  get canUndo(): boolean {
    return this.history.length > 0;
  }

  private ratioNorm(): number {
    return cameraRatioNorm(this.orientation, this.worldW, this.worldH);
  }

  private reframe(viewport: Box): void {
    this.viewport = clampToWorld(viewport);
    this.phase = "framing";
    this.lastResponse = null;
  }

  /** Drag by canvas pixels: center shifts by (dx/canvasW, dy/canvasH). */
  drag(dxPx: number, dyPx: number, canvasW: number, canvasH: number): void {
    this.reframe({
      ...this.viewport,
      x: this.viewport.x + dxPx / canvasW,
      y: this.viewport.y + dyPx / canvasH,
    });
  }

  /** Zoom about the center; factor > 1 widens the viewport. */
  zoom(factor: number): void {
    if (factor <= 0) return;
    const r = this.ratioNorm();
    const w = Math.min(this.viewport.w * factor, 4);
    this.reframe({ ...this.viewport, w, h: w / r });
  }

  /** Swap w:h, preserving area and center (then clamped). */
  toggleRatio(): void {
    this.orientation = this.orientation === "landscape" ? "portrait" : "landscape";
    const area = this.viewport.w * this.viewport.h;
    const r = this.ratioNorm();
    const w = Math.sqrt(area * r);
    this.reframe({ ...this.viewport, w, h: w / r });
  }

  zoomToFit(): void {
    this.reframe(zoomToFit(this.orientation, this.worldW, this.worldH));
  }

  /** Store a /recommend response; enters recommended or converged. */
  acceptResponse(resp: RecommendResponse): void {
    this.lastResponse = resp;
    this.phase = resp.converged ? "converged" : "recommended";
  }

  /** Adopt the predicted view as the new viewport; undoable. */
  apply(): void {
    if (!this.canApply || !this.lastResponse) return;
    this.history.push({ ...this.viewport });
    this.viewport = clampToWorld(fromList(this.lastResponse.next_viewport));
    this.phase = "applied";
    this.lastResponse = null;
  }

  /** Restore the viewport exactly as before the last apply. */
  undo(): void {
    const prev = this.history.pop();
    if (!prev) return;
    this.viewport = prev;
    this.phase = "framing";
    this.lastResponse = null;
  }
}
