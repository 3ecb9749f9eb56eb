// Stage view rendering as data: the draw list is a pure function of the
// latest snapshot plus the static plan overlay, so it can be unit-tested
// without a canvas. dom.ts replays the ops onto a 2D context.

import type { ConsoleViewState } from "./state.js";
import type { StateSnapshot } from "./types.js";

export const ENDSTOP_FLASH_WINDOW_S = 1.0;

export type DrawOp =
  | { op: "clear"; width: number; height: number }
  | { op: "workspace"; x: number; y: number; width: number; height: number }
  | { op: "plan-path"; points: [number, number][] }
  | { op: "trace"; points: [number, number][] }
  | { op: "marker"; x: number; y: number; halted: boolean }
  | { op: "endstop-flash"; axis: string; edge: "min" | "max"; x: number; y: number }
  | { op: "label"; text: string; x: number; y: number };

export interface Transform {
  scale: number;
  offsetX: number;
  offsetY: number;
  // canvas y grows downward; stage y grows upward
  toPx(xMm: number, yMm: number): [number, number];
}

export function fitWorkspace(
  snap: StateSnapshot,
  width: number,
  height: number,
  margin = 20,
): Transform {
  const w = snap.workspace;
  const spanX = w.x_max - w.x_min;
  const spanY = w.y_max - w.y_min;
  const scale = Math.min((width - 2 * margin) / spanX, (height - 2 * margin) / spanY);
  const offsetX = margin - w.x_min * scale;
  const offsetY = height - margin + w.y_min * scale;
  return {
    scale,
    offsetX,
    offsetY,
    toPx(xMm: number, yMm: number): [number, number] {
      return [offsetX + xMm * scale, offsetY - yMm * scale];
    },
  };
}

export function buildDrawList(
  view: ConsoleViewState,
  width: number,
  height: number,
): DrawOp[] {
  const ops: DrawOp[] = [{ op: "clear", width, height }];
  const snap = view.snapshot;
  if (!snap) {
    ops.push({ op: "label", text: "waiting for telemetry", x: width / 2, y: height / 2 });
    return ops;
  }
  const tf = fitWorkspace(snap, width, height);
  const [wx0, wy0] = tf.toPx(snap.workspace.x_min, snap.workspace.y_max);
  const [wx1, wy1] = tf.toPx(snap.workspace.x_max, snap.workspace.y_min);
  ops.push({ op: "workspace", x: wx0, y: wy0, width: wx1 - wx0, height: wy1 - wy0 });

  if (view.plan) {
    ops.push({
      op: "plan-path",
      points: view.plan.waypoints.map(([, x, y]) => tf.toPx(x, y)),
    });
  }

  const recentEndstops = snap.recent_events.filter(
    (ev) => ev.kind === "endstop" && snap.t_s - ev.t_s <= ENDSTOP_FLASH_WINDOW_S,
  );
  for (const ev of recentEndstops) {
    const w = snap.workspace;
    const edge =
      ev.axis === "X"
        ? ev.position_mm! <= w.x_min ? "min" : "max"
        : ev.position_mm! <= w.y_min ? "min" : "max";
    const [fx, fy] =
      ev.axis === "X"
        ? tf.toPx(ev.position_mm!, (w.y_min + w.y_max) / 2)
        : tf.toPx((w.x_min + w.x_max) / 2, ev.position_mm!);
    ops.push({ op: "endstop-flash", axis: ev.axis ?? "?", edge, x: fx, y: fy });
  }

  const [mx, my] = tf.toPx(snap.pose.x_mm, snap.pose.y_mm);
  ops.push({ op: "marker", x: mx, y: my, halted: recentEndstops.length > 0 });
  ops.push({
    op: "label",
    text: `x ${snap.pose.x_mm.toFixed(2)} mm  y ${snap.pose.y_mm.toFixed(2)} mm`,
    x: width / 2,
    y: height - 4,
  });
  return ops;
}
