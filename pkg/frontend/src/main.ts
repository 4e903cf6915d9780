/** DOM wiring for the interactive viewport UI. */

import { ApiClient } from "./api";
import { drawRecommendation, drawViewportOverlay } from "./overlay";
import { UiSession } from "./state";

const api = new ApiClient("");

const canvas = document.getElementById("world") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const fileInput = document.getElementById("file") as HTMLInputElement;
const recommendBtn = document.getElementById("recommend") as HTMLButtonElement;
const applyBtn = document.getElementById("apply") as HTMLButtonElement;
const undoBtn = document.getElementById("undo") as HTMLButtonElement;
const fitBtn = document.getElementById("fit") as HTMLButtonElement;
const ratioBtn = document.getElementById("ratio") as HTMLButtonElement;
const opsEl = document.getElementById("ops")!;
const statusEl = document.getElementById("status")!;
const bannerEl = document.getElementById("banner")!;

let session: UiSession | null = null;
let worldImage: HTMLImageElement | null = null;
let requestInFlight = false;

function showError(message: string): void {
  bannerEl.textContent = message;
  bannerEl.classList.add("visible");
  setTimeout(() => bannerEl.classList.remove("visible"), 4000);
}

function render(): void {
  if (!session || !worldImage) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(worldImage, 0, 0, canvas.width, canvas.height);
  drawViewportOverlay(ctx, session.viewport, canvas.width, canvas.height);
  if (session.lastResponse) {
    drawRecommendation(ctx, session.lastResponse, session.viewport,
                       canvas.width, canvas.height);
  }
  applyBtn.disabled = !session.canApply;
  undoBtn.disabled = !session.canUndo;
  recommendBtn.disabled = requestInFlight || session.phase === "converged";
  statusEl.textContent = session.phase === "converged" ? "converged ✓" : session.phase;
  statusEl.className = session.phase;
  opsEl.innerHTML = "";
  for (const op of session.lastResponse?.operations ?? []) {
    const chip = document.createElement("span");
    chip.className = "chip";
    chip.textContent = op.kind.startsWith("zoom")
      ? `${op.kind} ×${op.amount.toFixed(2)}`
      : `${op.kind} ${op.amount.toFixed(2)}`;
    opsEl.appendChild(chip);
  }
}

fileInput.addEventListener("change", async () => {
  const file = fileInput.files?.[0];
  if (!file) return;
  try {
    const created = await api.createSession(file, file.name);
    const img = new Image();
    img.onload = () => {
      worldImage = img;
      canvas.width = Math.min(900, created.world_w);
      canvas.height = Math.round(canvas.width * created.world_h / created.world_w);
      session = new UiSession(created.session_id, created.world_w, created.world_h);
      render();
    };
    img.src = URL.createObjectURL(file);
  } catch (err) {
    showError(`session failed: ${err}`);
  }
});

recommendBtn.addEventListener("click", async () => {
  if (!session || requestInFlight) return;
  requestInFlight = true;
  render();
  try {
    const resp = await api.recommend(session.sessionId, session.viewport,
                                     session.orientation);
    session.acceptResponse(resp);
  } catch (err) {
    showError(`recommendation failed: ${err}`);
  } finally {
    requestInFlight = false;
    render();
  }
});

applyBtn.addEventListener("click", () => {
  session?.apply();
  render();
});

undoBtn.addEventListener("click", () => {
  session?.undo();
  render();
});

fitBtn.addEventListener("click", () => {
  session?.zoomToFit();
  render();
});

ratioBtn.addEventListener("click", () => {
  session?.toggleRatio();
  render();
});

// viewport dragging
let dragging = false;
let lastX = 0;
let lastY = 0;
canvas.addEventListener("pointerdown", (e) => {
  dragging = true;
  lastX = e.offsetX;
  lastY = e.offsetY;
  canvas.setPointerCapture(e.pointerId);
});
canvas.addEventListener("pointermove", (e) => {
  if (!dragging || !session) return;
  session.drag(e.offsetX - lastX, e.offsetY - lastY, canvas.width, canvas.height);
  lastX = e.offsetX;
  lastY = e.offsetY;
  render();
});
canvas.addEventListener("pointerup", () => {
  dragging = false;
});
canvas.addEventListener("wheel", (e) => {
  if (!session) return;
  e.preventDefault();
  session.zoom(e.deltaY > 0 ? 1.05 : 1 / 1.05);
  render();
});
