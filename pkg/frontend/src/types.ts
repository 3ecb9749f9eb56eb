// JSON shapes of the control service /v1 endpoints.

export type ModeName = "IDLE" | "JOG" | "DANCE" | "SCAN" | "FLAP";

export interface Pose {
  x_mm: number;
  y_mm: number;
}

export interface ControllerState {
  mode: ModeName;
  motion_enabled: boolean;
  active_routine: string | null;
  flapper_hz: number;
}

export interface ServiceEvent {
  t_s: number;
  kind: string;
  axis?: string;
  position_mm?: number;
  reason?: string;
  hz?: number;
  routine?: string;
}

export interface Workspace {
  x_min: number;
  x_max: number;
  y_min: number;
  y_max: number;
}

export interface StateSnapshot {
  seq: number;
  t_s: number;
  pose: Pose;
  controller: ControllerState;
  active_plan_progress: number;
  recent_events: ServiceEvent[];
  workspace: Workspace;
}

export interface PlanPreview {
  duration_s: number;
  waypoints: [number, number, number][]; // [t_s, x_mm, y_mm]
}

export interface CommandBody {
  accepted: boolean;
  action: string | null;
  mode: ModeName;
  state: StateSnapshot;
  plan?: PlanPreview;
}

export type ApiResult =
  | { kind: "accepted"; body: CommandBody }
  | { kind: "rejected"; reason: string }
  | { kind: "error"; status: number; message: string };
