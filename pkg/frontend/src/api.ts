// Typed client for the control service. Only the documented /v1 endpoints
// are used; a 409 becomes a "rejected" result so the UI can show a banner
// instead of treating it as a transport failure.

import type { ApiResult, CommandBody, ModeName, StateSnapshot } from "./types.js";

async function post(url: string, payload: unknown): Promise<ApiResult> {
  let resp: Response;
  try {
    resp = await fetch(url, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  } catch (err) {
    return { kind: "error", status: 0, message: String(err) };
  }
  if (resp.ok) {
    return { kind: "accepted", body: (await resp.json()) as CommandBody };
  }
  let message = `HTTP ${resp.status}`;
  try {
    const detail = (await resp.json()).detail;
    if (detail && typeof detail === "object" && "reason" in detail) {
      message = String(detail.reason);
    } else {
      message = JSON.stringify(detail);
    }
  } catch {
    // keep the status text
  }
  if (resp.status === 409) {
    return { kind: "rejected", reason: message };
  }
  return { kind: "error", status: resp.status, message };
}

export class CombClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  async state(): Promise<StateSnapshot> {
    const resp = await fetch(this.url("/v1/state"));
    if (!resp.ok) throw new Error(`state fetch failed: HTTP ${resp.status}`);
    return (await resp.json()) as StateSnapshot;
  }

  jog(axis: "X" | "Y", direction: 1 | -1, repeat = 1): Promise<ApiResult> {
    return post(this.url("/v1/command/jog"), { axis, direction, repeat });
  }

  setMode(mode: ModeName): Promise<ApiResult> {
    return post(this.url("/v1/command/mode"), { mode });
  }

  pressKey(key: string): Promise<ApiResult> {
    return post(this.url("/v1/command/key"), { key });
  }

  startDance(params?: Record<string, unknown>): Promise<ApiResult> {
    return post(this.url("/v1/routine/dance"), params ? { params } : {});
  }

  startScan(plan?: Record<string, unknown>): Promise<ApiResult> {
    return post(this.url("/v1/routine/scan"), plan ? { plan } : {});
  }

  setFlapper(hz: number): Promise<ApiResult> {
    return post(this.url("/v1/flapper"), { hz });
  }

  eventsUrl(): string {
    return this.url("/v1/events");
  }
}
