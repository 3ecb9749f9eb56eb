"""Network control surface: HTTP command endpoints plus a live state stream.

All effects serialize through the control loop's command queue; the tick
loop is the sole state mutator. Request handlers block until the loop has
applied their command, so responses always reflect the post-command state
and concurrent commands land in one total order.

Endpoints (all under /v1):
    GET  /v1/state           latest StateSnapshot
    GET  /v1/events          server-sent snapshot stream, 20 Hz nominal
    POST /v1/command/jog     {"axis": "X"|"Y", "direction": 1|-1, "repeat": n}
    POST /v1/command/mode    {"mode": "IDLE"|"JOG"|"DANCE"|"SCAN"|"FLAP"}
    POST /v1/command/key     {"key": "#"}          keypad parity
    POST /v1/routine/dance   {"params": {...}}     optional overrides
    POST /v1/routine/scan    {"plan": {...}}       optional overrides
    POST /v1/flapper         {"hz": 13.0}

Schema violations map to 400-class responses, rejected transitions to 409.
A slow stream subscriber always receives the latest snapshot, never a
stale backlog.
"""

# No `from __future__ import annotations` here: the route models are defined
# inside create_app and FastAPI must see them as live classes, not strings.

import json
import queue
import threading
import time
from dataclasses import dataclass
from typing import Literal

from .controller import (
    Controller,
    Key,
    KeypadCommand,
    Mode,
    RejectedTransition,
    UnknownKey,
    parse_key,
)
from .dance import DanceParams, InvalidDanceParams
from .scanplan import InvalidScanParams, ScanPlan

SNAPSHOT_EVERY_TICKS = 50  # 20 Hz at the default 1 ms tick


@dataclass
class StateSnapshot:
    seq: int
    t_s: float
    pose: dict
    controller: dict
    active_plan_progress: float
    recent_events: list
    workspace: dict

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "t_s": self.t_s,
            "pose": self.pose,
            "controller": self.controller,
            "active_plan_progress": self.active_plan_progress,
            "recent_events": self.recent_events,
            "workspace": self.workspace,
        }


class _Subscription:
    """Latest-wins snapshot mailbox for one stream consumer."""

    def __init__(self):
        self._box: queue.Queue = queue.Queue(maxsize=1)

    def publish(self, snap: StateSnapshot) -> None:
        try:
            self._box.put_nowait(snap)
        except queue.Full:
            try:
                self._box.get_nowait()
            except queue.Empty:
                pass
            try:
                self._box.put_nowait(snap)
            except queue.Full:
                pass

    def get(self, timeout: float = 1.0) -> StateSnapshot | None:
        try:
            return self._box.get(timeout=timeout)
        except queue.Empty:
            return None


class ControlLoop:
    """Background tick loop owning the controller.

    Commands submitted from any thread run between ticks in arrival order.
    realtime=True paces the loop to wall-clock (scaled by ``speed``);
    realtime=False free-runs, which tests use.
    """

    def __init__(self, controller: Controller, realtime: bool = True,
                 speed: float = 1.0, snapshot_every: int = SNAPSHOT_EVERY_TICKS):
        self.controller = controller
        self.realtime = realtime
        self.speed = speed
        self.snapshot_every = snapshot_every
        self._commands: queue.Queue = queue.Queue()
        self._subs: list[_Subscription] = []
        self._subs_lock = threading.Lock()
        self._seq = 0
        self._tick_count = 0
        self._latest: StateSnapshot | None = None
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._publish_snapshot()

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        if self._thread is not None:
            return
        self._thread = threading.Thread(target=self._run, name="comb-loop", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None

    def _run(self) -> None:
        batch = 10  # ticks per sleep when pacing
        tick_s = self.controller.sim.tick_s
        next_deadline = time.monotonic()
        while not self._stop.is_set():
            self._drain_commands()
            for _ in range(batch):
                self.controller.tick()
                self._tick_count += 1
                if self._tick_count % self.snapshot_every == 0:
                    self._publish_snapshot()
            if self.realtime:
                next_deadline += batch * tick_s / max(self.speed, 1e-9)
                delay = next_deadline - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                else:
                    next_deadline = time.monotonic()
            else:
                # Free-run still has to share the GIL with request handlers
                # and stream consumers; cap it near 1000x real time.
                if self._tick_count % 1000 < batch:
                    time.sleep(0.001)

    def _drain_commands(self) -> None:
        while True:
            try:
                fn, done, result = self._commands.get_nowait()
            except queue.Empty:
                return
            try:
                result["value"] = fn()
            except Exception as exc:  # propagated to the submitting thread
                result["error"] = exc
            finally:
                done.set()

    def submit(self, fn, timeout: float = 10.0):
        """Run fn() on the loop thread before the next tick; returns its result."""
        if self._thread is None:
            raise RuntimeError("control loop is not running")
        done = threading.Event()
        result: dict = {}
        self._commands.put((fn, done, result))
        if not done.wait(timeout):
            raise TimeoutError("control loop did not process the command in time")
        if "error" in result:
            raise result["error"]
        self._publish_snapshot()
        return result.get("value")

    # -- snapshots ----------------------------------------------------------

    def _publish_snapshot(self) -> None:
        c = self.controller
        pose = c.sim.pose()
        self._seq += 1
        snap = StateSnapshot(
            seq=self._seq,
            t_s=pose.t,
            pose={"x_mm": pose.x, "y_mm": pose.y},
            controller=c.state.to_dict(),
            active_plan_progress=c.routine_progress,
            recent_events=list(c.notices[-16:]),
            workspace={
                "x_min": c.sim.config.x.travel_min,
                "x_max": c.sim.config.x.travel_max,
                "y_min": c.sim.config.y.travel_min,
                "y_max": c.sim.config.y.travel_max,
            },
        )
        self._latest = snap
        with self._subs_lock:
            for sub in self._subs:
                sub.publish(snap)

    def snapshot(self) -> StateSnapshot:
        return self._latest

    def subscribe(self) -> _Subscription:
        sub = _Subscription()
        with self._subs_lock:
            self._subs.append(sub)
        if self._latest is not None:
            sub.publish(self._latest)
        return sub

    def unsubscribe(self, sub: _Subscription) -> None:
        with self._subs_lock:
            if sub in self._subs:
                self._subs.remove(sub)


def create_app(loop: ControlLoop, console_dir: str | None = None):
    """FastAPI application bound to a running control loop.

    console_dir, when given, is served as static files at / so the browser
    console loads from the same origin as the /v1 API.
    """
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import StreamingResponse
    from pydantic import BaseModel, Field

    app = FastAPI(title="comb control service", version="1")

    class JogRequest(BaseModel):
        axis: Literal["X", "Y"]
        direction: Literal[1, -1]
        repeat: int = Field(default=1, ge=1, le=100)

    class ModeRequest(BaseModel):
        mode: Literal["IDLE", "JOG", "DANCE", "SCAN", "FLAP"]

    class KeyRequest(BaseModel):
        key: str

    class DanceRequest(BaseModel):
        params: dict | None = None

    class ScanRequest(BaseModel):
        plan: dict | None = None

    class FlapperRequest(BaseModel):
        hz: float = Field(ge=0.0, le=1000.0)

    def _ok(action: str | None = None) -> dict:
        snap = loop.snapshot()
        return {
            "accepted": True,
            "action": action,
            "mode": snap.controller["mode"],
            "state": snap.to_dict(),
        }

    def _apply(fn):
        try:
            return loop.submit(fn)
        except RejectedTransition as exc:
            raise HTTPException(
                status_code=409,
                detail={"error": "RejectedTransition", "reason": str(exc)},
            )
        except UnknownKey as exc:
            raise HTTPException(status_code=400, detail={"error": "UnknownKey", "reason": str(exc)})
        except (InvalidDanceParams, InvalidScanParams) as exc:
            raise HTTPException(status_code=400, detail={"error": type(exc).__name__, "reason": str(exc)})

    def _dispatch_or_409(key: Key) -> None:
        res = loop.controller.dispatch(KeypadCommand(key, t=loop.controller.sim.t))
        if not res.accepted:
            raise RejectedTransition(res.reason or "rejected")

    @app.get("/v1/state")
    def get_state():
        return loop.snapshot().to_dict()

    @app.get("/v1/events")
    def stream_events():
        def gen():
            sub = loop.subscribe()
            try:
                last_seq = 0
                while True:
                    snap = sub.get(timeout=2.0)
                    if snap is None:
                        yield ": keepalive\n\n"
                        continue
                    if snap.seq <= last_seq:
                        continue
                    last_seq = snap.seq
                    yield f"id: {snap.seq}\ndata: {json.dumps(snap.to_dict())}\n\n"
            finally:
                loop.unsubscribe(sub)

        return StreamingResponse(gen(), media_type="text/event-stream")

    @app.post("/v1/command/jog")
    def post_jog(req: JogRequest):
        key = {
            ("X", 1): Key.JOG_X_PLUS,
            ("X", -1): Key.JOG_X_MINUS,
            ("Y", 1): Key.JOG_Y_PLUS,
            ("Y", -1): Key.JOG_Y_MINUS,
        }[(req.axis, req.direction)]

        def run():
            for _ in range(req.repeat):
                _dispatch_or_409(key)

        _apply(run)
        return _ok(f"jog {req.axis} {req.direction:+d} x{req.repeat}")

    @app.post("/v1/command/mode")
    def post_mode(req: ModeRequest):
        key = {
            "IDLE": Key.MODE_IDLE,
            "JOG": Key.MODE_JOG,
            "DANCE": Key.MODE_DANCE,
            "SCAN": Key.MODE_SCAN,
            "FLAP": Key.MODE_FLAP,
        }[req.mode]
        _apply(lambda: _dispatch_or_409(key))
        return _ok(f"mode={req.mode}")

    @app.post("/v1/command/key")
    def post_key(req: KeyRequest):
        def run():
            key = parse_key(req.key)
            _dispatch_or_409(key)

        _apply(run)
        return _ok(f"key {req.key}")

    def _plan_preview(plan, max_points: int = 240) -> dict:
        """Decimated waypoint polyline for the console's path overlay."""
        stride = max(len(plan.t) // max_points, 1)
        idx = list(range(0, len(plan.t), stride))
        if idx and idx[-1] != len(plan.t) - 1:
            idx.append(len(plan.t) - 1)
        return {
            "duration_s": plan.duration,
            "waypoints": [
                [float(plan.t[i]), float(plan.x[i]), float(plan.y[i])] for i in idx
            ],
        }

    @app.post("/v1/routine/dance")
    def post_dance(req: DanceRequest):
        from .dance import generate

        def run():
            params = loop.controller.dance_params
            if req.params:
                base = params.to_dict()
                base.update(req.params)
                params = DanceParams.from_dict(base)
            plan = generate(params)
            rid = loop.controller.start_dance(plan=plan)
            return rid, plan

        rid, plan = _apply(run)
        resp = _ok(f"routine {rid}")
        resp["plan"] = _plan_preview(plan)
        return resp

    @app.post("/v1/routine/scan")
    def post_scan(req: ScanRequest):
        def run():
            plan = None
            if req.plan:
                base = loop.controller.scan_plan.to_dict() if loop.controller.scan_plan else {}
                base.pop("derived", None)
                base.update(req.plan)
                plan = ScanPlan.from_dict(base)
            return loop.controller.start_scan(plan=plan)

        rid = _apply(run)
        return _ok(f"routine {rid}")

    @app.post("/v1/flapper")
    def post_flapper(req: FlapperRequest):
        _apply(lambda: loop.controller.set_flapper(req.hz))
        return _ok(f"flapper {req.hz} Hz")

    if console_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=console_dir, html=True), name="console")

    return app


def serve(controller: Controller, host: str = "127.0.0.1", port: int = 8750,
          speed: float = 1.0, console_dir: str | None = None) -> None:
    """Run the control loop and HTTP server until interrupted."""
    import uvicorn

    loop = ControlLoop(controller, realtime=True, speed=speed)
    loop.start()
    try:
        uvicorn.run(
            create_app(loop, console_dir=console_dir),
            host=host, port=port, log_level="warning",
        )
    finally:
        loop.stop()
