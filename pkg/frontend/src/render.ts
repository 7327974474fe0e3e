/** DOM rendering for the session and practice views. */
import type { PracticeView, SessionView } from "./view.js";

const MARKER_COLORS: Record<string, string> = {
  predicted: "#2b6fff",
  corrected: "#f0c419",
  confirmed: "#2e9e44",
};

function drawCrosshair(
  ctx: CanvasRenderingContext2D,
  u: number,
  v: number,
  radius: number,
  color: string,
  fill = false,
): void {
  ctx.strokeStyle = color;
  ctx.fillStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(u, v, radius, 0, Math.PI * 2);
  if (fill) ctx.fill();
  ctx.stroke();
  ctx.beginPath();
  ctx.moveTo(u - radius - 4, v);
  ctx.lineTo(u + radius + 4, v);
  ctx.moveTo(u, v - radius - 4);
  ctx.lineTo(u, v + radius + 4);
  ctx.stroke();
}

export function renderSession(root: HTMLElement, view: SessionView, imageUrl: string): void {
  const img = root.querySelector<HTMLImageElement>(".scene-image")!;
  const canvas = root.querySelector<HTMLCanvasElement>(".overlay")!;
  const badge = root.querySelector<HTMLElement>(".phase-badge")!;
  const history = root.querySelector<HTMLElement>(".history")!;
  const input = root.querySelector<HTMLInputElement>(".utterance-input")!;
  const send = root.querySelector<HTMLButtonElement>(".utterance-send")!;
  const summary = root.querySelector<HTMLElement>(".task-summary")!;

  if (img.dataset.url !== imageUrl) {
    img.src = imageUrl;
    img.dataset.url = imageUrl;
  }
  canvas.width = view.image.width;
  canvas.height = view.image.height;
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (view.marker) {
    drawCrosshair(ctx, view.marker.u, view.marker.v, 9, MARKER_COLORS[view.marker.style]!);
  }

  badge.textContent = view.phase;
  badge.dataset.phase = view.phase;

  history.replaceChildren(
    ...view.history.map((turn) => {
      const item = document.createElement("li");
      item.dataset.kind = turn.kind;
      const where = turn.target ? ` -> (${turn.target.u}, ${turn.target.v})` : "";
      item.textContent = `[${turn.intent ?? "?"}] ${turn.utterance}${where} | ${turn.message}`;
      return item;
    }),
  );

  input.disabled = view.inputDisabled;
  send.disabled = view.inputDisabled;
  summary.hidden = !view.executed;
  if (view.executed) {
    const last = view.history[view.history.length - 1];
    summary.textContent = last ? `Executing: ${last.message}` : "Executing";
  }
}

export function renderPractice(root: HTMLElement, view: PracticeView, imageUrl: string): void {
  const img = root.querySelector<HTMLImageElement>(".scene-image")!;
  const canvas = root.querySelector<HTMLCanvasElement>(".overlay")!;
  const input = root.querySelector<HTMLInputElement>(".utterance-input")!;
  const send = root.querySelector<HTMLButtonElement>(".utterance-send")!;
  const budget = root.querySelector<HTMLElement>(".budget")!;
  const series = root.querySelector<HTMLElement>(".distance-series")!;
  const summary = root.querySelector<HTMLElement>(".trial-summary")!;

  if (img.dataset.url !== imageUrl) {
    img.src = imageUrl;
    img.dataset.url = imageUrl;
  }
  canvas.width = view.image.width;
  canvas.height = view.image.height;
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#d23c3c";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(view.target.u, view.target.v, view.targetRadius, 0, Math.PI * 2);
  ctx.stroke();
  if (view.marker) {
    const color = view.hit ? "#2e9e44" : "#2b6fff";
    drawCrosshair(ctx, view.marker.u, view.marker.v, view.markerRadius, color, true);
  }

  budget.textContent = `${view.remainingBudget} prompt${view.remainingBudget === 1 ? "" : "s"} left`;
  series.replaceChildren(
    ...view.distances.map((d, i) => {
      const item = document.createElement("li");
      item.textContent = `prompt ${i + 1}: ${d.toFixed(1)} px`;
      return item;
    }),
  );

  input.disabled = view.inputDisabled;
  send.disabled = view.inputDisabled;
  summary.hidden = !view.complete;
  if (view.complete) {
    const distances = view.distances.map((d) => d.toFixed(1)).join(", ");
    summary.textContent = view.hit
      ? `Trial complete, on target. Distances: ${distances} px`
      : `Trial complete. Distances: ${distances} px`;
  }
}

export function showBanner(root: HTMLElement, message: string | null): void {
  const banner = root.querySelector<HTMLElement>(".banner")!;
  banner.hidden = message === null;
  banner.textContent = message ?? "";
}
