// Console view state: a pure reducer over snapshots, command lifecycle and
// connection events. The rendered pose always comes from the highest
// sequence number received (latest wins; stale frames are dropped).

import type { PlanPreview, StateSnapshot } from "./types.js";

export const STALE_AFTER_MS = 2000;

export type ConnectionStatus = "connecting" | "live" | "stale" | "closed";

export interface ConsoleViewState {
  snapshot: StateSnapshot | null;
  lastSeq: number;
  lastReceivedMs: number | null;
  connection: ConnectionStatus;
  pendingCommand: string | null;
  rejection: string | null;
  plan: PlanPreview | null;
}

export function initialViewState(): ConsoleViewState {
  return {
    snapshot: null,
    lastSeq: 0,
    lastReceivedMs: null,
    connection: "connecting",
    pendingCommand: null,
    rejection: null,
    plan: null,
  };
}

export type ViewEvent =
  | { type: "snapshot"; snapshot: StateSnapshot; nowMs: number }
  | { type: "tick"; nowMs: number }
  | { type: "connection"; status: "connecting" | "live" | "closed" }
  | { type: "command-sent"; label: string }
  | { type: "command-accepted" }
  | { type: "command-rejected"; reason: string }
  | { type: "command-failed"; message: string }
  | { type: "plan"; plan: PlanPreview | null };

export function reduce(state: ConsoleViewState, event: ViewEvent): ConsoleViewState {
  switch (event.type) {
    case "snapshot": {
      if (event.snapshot.seq <= state.lastSeq) return state; // out of order: drop
      const next: ConsoleViewState = {
        ...state,
        snapshot: event.snapshot,
        lastSeq: event.snapshot.seq,
        lastReceivedMs: event.nowMs,
        connection: "live",
      };
      // the routine ending clears the overlay
      if (state.plan && event.snapshot.controller.active_routine === null &&
          event.snapshot.active_plan_progress >= 1.0) {
        next.plan = state.plan; // keep the completed path visible
      }
      return next;
    }
    case "tick": {
      if (
        state.connection === "live" &&
        state.lastReceivedMs !== null &&
        event.nowMs - state.lastReceivedMs > STALE_AFTER_MS
      ) {
        return { ...state, connection: "stale" };
      }
      return state;
    }
    case "connection":
      if (event.status === "live" && state.snapshot === null) {
        return { ...state, connection: "connecting" }; // live once data arrives
      }
      return { ...state, connection: event.status };
    case "command-sent":
      return { ...state, pendingCommand: event.label, rejection: null };
    case "command-accepted":
      return { ...state, pendingCommand: null, rejection: null };
    case "command-rejected":
      return { ...state, pendingCommand: null, rejection: event.reason };
    case "command-failed":
      return { ...state, pendingCommand: null, rejection: `request failed: ${event.message}` };
    case "plan":
      return { ...state, plan: event.plan };
  }
}

export interface ControlFlags {
  jogEnabled: boolean;
  startEnabled: boolean;
  flapperEnabled: boolean;
  modeSwitchEnabled: boolean;
  progress: number;
  banner: string | null;
  staleConnection: boolean;
}

export function controlFlags(state: ConsoleViewState): ControlFlags {
  const snap = state.snapshot;
  const busy = state.pendingCommand !== null;
  const routineActive = snap?.controller.active_routine != null;
  return {
    jogEnabled:
      !busy && !!snap && snap.controller.mode === "JOG" &&
      snap.controller.motion_enabled && !routineActive,
    startEnabled:
      !busy && !!snap && !routineActive &&
      (snap.controller.mode === "FLAP" ||
        (snap.controller.motion_enabled &&
          (snap.controller.mode === "DANCE" || snap.controller.mode === "SCAN"))),
    flapperEnabled: !busy && !!snap && snap.controller.mode === "FLAP",
    modeSwitchEnabled: !busy && !!snap && !routineActive,
    progress: snap ? snap.active_plan_progress : 0,
    banner: state.rejection,
    staleConnection: state.connection === "stale",
  };
}
