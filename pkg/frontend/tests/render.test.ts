import { describe, expect, it } from "vitest";

import { buildDrawList, fitWorkspace } from "../src/render.js";
import { initialViewState, reduce } from "../src/state.js";
import type { StateSnapshot } from "../src/types.js";

function snap(overrides: Partial<StateSnapshot> = {}): StateSnapshot {
  return {
    seq: 1,
    t_s: 10.0,
    pose: { x_mm: 100, y_mm: 50 },
    controller: { mode: "JOG", motion_enabled: true, active_routine: null, flapper_hz: 0 },
    active_plan_progress: 1,
    recent_events: [],
    workspace: { x_min: 0, x_max: 200, y_min: 0, y_max: 200 },
    ...overrides,
  };
}

function viewWith(s: StateSnapshot) {
  return reduce(initialViewState(), { type: "snapshot", snapshot: s, nowMs: 0 });
}

describe("workspace transform", () => {
  it("maps stage mm to canvas px with y flipped", () => {
    const tf = fitWorkspace(snap(), 640, 640, 20);
    const [x0, y0] = tf.toPx(0, 0);
    const [x1, y1] = tf.toPx(200, 200);
    expect(x0).toBeCloseTo(20);
    expect(y0).toBeCloseTo(620); // stage origin at the bottom-left
    expect(x1).toBeCloseTo(620);
    expect(y1).toBeCloseTo(20);
  });
});

describe("draw list", () => {
  it("renders placeholder without telemetry", () => {
    const ops = buildDrawList(initialViewState(), 640, 640);
    expect(ops[0].op).toBe("clear");
    expect(ops.some((o) => o.op === "label")).toBe(true);
    expect(ops.some((o) => o.op === "marker")).toBe(false);
  });

  it("draws workspace and pose marker at transformed coordinates", () => {
    const view = viewWith(snap());
    const ops = buildDrawList(view, 640, 640);
    const marker = ops.find((o) => o.op === "marker");
    expect(marker).toBeDefined();
    if (marker && marker.op === "marker") {
      expect(marker.x).toBeCloseTo(320); // 100 mm of a 200 mm span
      expect(marker.y).toBeCloseTo(620 - 150); // 50 mm up from the bottom edge
      expect(marker.halted).toBe(false);
    }
  });

  it("overlays the plan path when present", () => {
    let view = viewWith(snap());
    view = reduce(view, {
      type: "plan",
      plan: { duration_s: 5, waypoints: [[0, 0, 0], [1, 10, 10], [2, 0, 20]] },
    });
    const ops = buildDrawList(view, 640, 640);
    const path = ops.find((o) => o.op === "plan-path");
    expect(path).toBeDefined();
    if (path && path.op === "plan-path") {
      expect(path.points).toHaveLength(3);
    }
  });

  it("flashes a recent endstop and marks the marker halted", () => {
    const view = viewWith(
      snap({
        recent_events: [{ t_s: 9.5, kind: "endstop", axis: "X", position_mm: 200 }],
      }),
    );
    const ops = buildDrawList(view, 640, 640);
    const flash = ops.find((o) => o.op === "endstop-flash");
    expect(flash).toBeDefined();
    if (flash && flash.op === "endstop-flash") {
      expect(flash.axis).toBe("X");
      expect(flash.edge).toBe("max");
    }
    const marker = ops.find((o) => o.op === "marker");
    if (marker && marker.op === "marker") expect(marker.halted).toBe(true);
  });

  it("ignores endstop events older than the flash window", () => {
    const view = viewWith(
      snap({
        t_s: 20.0,
        recent_events: [{ t_s: 9.5, kind: "endstop", axis: "X", position_mm: 200 }],
      }),
    );
    const ops = buildDrawList(view, 640, 640);
    expect(ops.some((o) => o.op === "endstop-flash")).toBe(false);
  });

  it("is a pure function of its inputs", () => {
    const view = viewWith(snap());
    const a = buildDrawList(view, 640, 640);
    const b = buildDrawList(view, 640, 640);
    expect(a).toEqual(b);
  });
});
