// Thin DOM layer: replays draw ops onto the canvas and reflects control
// flags onto the buttons. All decisions happen in state.ts/render.ts.

import type { ControlFlags } from "./state.js";
import type { DrawOp } from "./render.js";

export function applyDrawList(ctx: CanvasRenderingContext2D, ops: DrawOp[]): void {
  for (const op of ops) {
    switch (op.op) {
      case "clear":
        ctx.fillStyle = "#10141a";
        ctx.fillRect(0, 0, op.width, op.height);
        break;
      case "workspace":
        ctx.strokeStyle = "#3c4654";
        ctx.lineWidth = 1.5;
        ctx.strokeRect(op.x, op.y, op.width, op.height);
        break;
      case "plan-path":
        ctx.strokeStyle = "#2e6f40";
        ctx.lineWidth = 1;
        ctx.beginPath();
        op.points.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
        ctx.stroke();
        break;
      case "trace":
        ctx.strokeStyle = "#7fb069";
        ctx.lineWidth = 1;
        ctx.beginPath();
        op.points.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
        ctx.stroke();
        break;
      case "marker":
        ctx.fillStyle = op.halted ? "#e4572e" : "#f5cb5c";
        ctx.beginPath();
        ctx.arc(op.x, op.y, 5, 0, 2 * Math.PI);
        ctx.fill();
        break;
      case "endstop-flash":
        ctx.fillStyle = "rgba(228, 87, 46, 0.6)";
        ctx.beginPath();
        ctx.arc(op.x, op.y, 12, 0, 2 * Math.PI);
        ctx.fill();
        break;
      case "label":
        ctx.fillStyle = "#9aa7b4";
        ctx.font = "12px monospace";
        ctx.textAlign = "center";
        ctx.fillText(op.text, op.x, op.y);
        break;
    }
  }
}

export interface ControlElements {
  jogButtons: HTMLButtonElement[];
  startButton: HTMLButtonElement;
  stopButton: HTMLButtonElement;
  enableButton: HTMLButtonElement;
  modeButtons: HTMLButtonElement[];
  flapperInput: HTMLInputElement;
  flapperButton: HTMLButtonElement;
  banner: HTMLElement;
  progressBar: HTMLElement;
  connection: HTMLElement;
  modeLabel: HTMLElement;
}

export function applyControlFlags(el: ControlElements, flags: ControlFlags, mode: string): void {
  el.jogButtons.forEach((b) => (b.disabled = !flags.jogEnabled));
  el.startButton.disabled = !flags.startEnabled;
  el.modeButtons.forEach((b) => {
    b.disabled = !flags.modeSwitchEnabled;
    b.classList.toggle("active", b.dataset.mode === mode);
  });
  el.flapperButton.disabled = !flags.flapperEnabled;
  el.banner.textContent = flags.banner ?? "";
  el.banner.style.display = flags.banner ? "block" : "none";
  el.progressBar.style.width = `${(flags.progress * 100).toFixed(1)}%`;
  el.connection.textContent = flags.staleConnection ? "stale" : "live";
  el.connection.classList.toggle("stale", flags.staleConnection);
  el.modeLabel.textContent = mode;
}
