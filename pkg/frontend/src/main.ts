// Browser entry point: wires the service client, the snapshot stream and
// the keyboard bindings (which mirror the controller's keypad layout) to
// the DOM. One service call per user action; conflicting controls stay
// disabled until the response lands.

import { CombClient } from "./api.js";
import { applyControlFlags, applyDrawList, ControlElements } from "./dom.js";
import { buildDrawList } from "./render.js";
import {
  ConsoleViewState,
  ViewEvent,
  controlFlags,
  initialViewState,
  reduce,
} from "./state.js";
import { subscribeState } from "./stream.js";
import type { ApiResult, ModeName } from "./types.js";

const client = new CombClient(window.location.origin);

let view: ConsoleViewState = initialViewState();
let frameQueued = false;

const canvas = document.getElementById("stage") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;

const els: ControlElements = {
  jogButtons: Array.from(document.querySelectorAll<HTMLButtonElement>("[data-jog]")),
  startButton: document.getElementById("btn-start") as HTMLButtonElement,
  stopButton: document.getElementById("btn-stop") as HTMLButtonElement,
  enableButton: document.getElementById("btn-enable") as HTMLButtonElement,
  modeButtons: Array.from(document.querySelectorAll<HTMLButtonElement>("[data-mode]")),
  flapperInput: document.getElementById("flapper-hz") as HTMLInputElement,
  flapperButton: document.getElementById("btn-flapper") as HTMLButtonElement,
  banner: document.getElementById("banner")!,
  progressBar: document.getElementById("progress-fill")!,
  connection: document.getElementById("connection")!,
  modeLabel: document.getElementById("mode-label")!,
};

function dispatch(event: ViewEvent): void {
  view = reduce(view, event);
  if (!frameQueued) {
    frameQueued = true;
    requestAnimationFrame(() => {
      frameQueued = false;
      applyDrawList(ctx, buildDrawList(view, canvas.width, canvas.height));
      applyControlFlags(els, controlFlags(view), view.snapshot?.controller.mode ?? "-");
    });
  }
}

async function send(label: string, call: () => Promise<ApiResult>): Promise<void> {
  dispatch({ type: "command-sent", label });
  const result = await call();
  if (result.kind === "accepted") {
    if (result.body.plan) dispatch({ type: "plan", plan: result.body.plan });
    dispatch({ type: "command-accepted" });
  } else if (result.kind === "rejected") {
    dispatch({ type: "command-rejected", reason: result.reason });
  } else {
    dispatch({ type: "command-failed", message: result.message });
  }
}

// -- controls ----------------------------------------------------------

for (const btn of els.jogButtons) {
  const [axis, dir] = btn.dataset.jog!.split(",");
  btn.addEventListener("click", () =>
    send(`jog ${axis}`, () => client.jog(axis as "X" | "Y", Number(dir) as 1 | -1)),
  );
}
for (const btn of els.modeButtons) {
  btn.addEventListener("click", () =>
    send(`mode ${btn.dataset.mode}`, () => client.setMode(btn.dataset.mode as ModeName)),
  );
}
els.startButton.addEventListener("click", () => {
  const mode = view.snapshot?.controller.mode;
  if (mode === "DANCE") {
    void send("start dance", () => client.startDance());
  } else if (mode === "SCAN") {
    void send("start scan", () => client.startScan());
  } else {
    void send("start", () => client.pressKey("#"));
  }
});
els.stopButton.addEventListener("click", () => send("stop", () => client.pressKey("*")));
els.enableButton.addEventListener("click", () => send("enable", () => client.pressKey("0")));
els.flapperButton.addEventListener("click", () =>
  send("flapper", () => client.setFlapper(Number(els.flapperInput.value))),
);

// Keyboard bindings mirror the embedded keypad for muscle-memory parity.
// Held arrows repeat at the keypad's documented 10 Hz rate.
const JOG_REPEAT_MS = 100;
const jogKeys: Record<string, ["X" | "Y", 1 | -1]> = {
  ArrowRight: ["X", 1],
  ArrowLeft: ["X", -1],
  ArrowUp: ["Y", 1],
  ArrowDown: ["Y", -1],
};
const keyBindings: Record<string, () => Promise<ApiResult>> = {
  "1": () => client.setMode("IDLE"),
  "2": () => client.setMode("JOG"),
  "3": () => client.setMode("DANCE"),
  "4": () => client.setMode("SCAN"),
  "5": () => client.setMode("FLAP"),
  "#": () => client.pressKey("#"),
  "*": () => client.pressKey("*"),
  "0": () => client.pressKey("0"),
};
let jogRepeatTimer: ReturnType<typeof setInterval> | null = null;

window.addEventListener("keydown", (ev) => {
  const jog = jogKeys[ev.key];
  if (jog) {
    ev.preventDefault();
    if (ev.repeat || jogRepeatTimer !== null) return; // our own 10 Hz timer repeats
    const [axis, dir] = jog;
    void send(`jog ${axis}`, () => client.jog(axis, dir));
    jogRepeatTimer = setInterval(() => {
      if (view.pendingCommand === null) {
        void send(`jog ${axis}`, () => client.jog(axis, dir));
      }
    }, JOG_REPEAT_MS);
    return;
  }
  const call = keyBindings[ev.key];
  if (call && view.pendingCommand === null) {
    ev.preventDefault();
    void send(`key ${ev.key}`, call);
  }
});
window.addEventListener("keyup", (ev) => {
  if (jogKeys[ev.key] && jogRepeatTimer !== null) {
    clearInterval(jogRepeatTimer);
    jogRepeatTimer = null;
  }
});

// -- telemetry ----------------------------------------------------------

subscribeState(
  client.eventsUrl(),
  (snap) => dispatch({ type: "snapshot", snapshot: snap, nowMs: Date.now() }),
  (status) => dispatch({ type: "connection", status }),
);
setInterval(() => dispatch({ type: "tick", nowMs: Date.now() }), 500);
