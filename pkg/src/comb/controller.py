"""Mode-based control layer over the stage simulator.

Replicates the embedded control surface: a keypad drives mode switching,
jogging, motion enable and routine triggering, and the controller
synchronizes stage motion with payload actuation (wing flapper, image
capture) on one timebase.

Keymap (stand-in; capabilities are fixed, bindings are ours):
    1..5   select mode IDLE / JOG / DANCE / SCAN / FLAP
    arrows jog one step (1 mm) per press; hold = repeat at 10 Hz
    #      start (routine in DANCE/SCAN, flapper drive in FLAP)
    *      stop everything and disable motion (local e-stop)
    0      toggle motion enable

The transition table is total over mode x key: every pair either applies
a rule or yields a RejectedTransition notice, never an undefined state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from .dance import DanceParams, TrajectoryPlan, generate
from .errors import CombError
from .scanplan import ScanPlan
from .stage import FollowHandle, StageConfig, StagePose, StageSimulator

JOG_STEP_MM = 1.0
JOG_REPEAT_HZ = 10.0  # held-key repeat rate contract; the console implements it
SETTLE_S = 0.1      # stillness required before a capture trigger
DEFAULT_EXPOSURE_S = 10.0  # capture plus on-board storage budget
DEFAULT_FLAPPER_HZ = 13.0


class UnknownKey(CombError):
    pass


class RejectedTransition(CombError):
    pass


class AbortedByEndstop(CombError):
    def __init__(self, msg: str, log: "ExecutionLog"):
        super().__init__(msg)
        self.log = log


class Mode(str, Enum):
    IDLE = "IDLE"
    JOG = "JOG"
    DANCE = "DANCE"
    SCAN = "SCAN"
    FLAP = "FLAP"


class Key(str, Enum):
    MODE_IDLE = "1"
    MODE_JOG = "2"
    MODE_DANCE = "3"
    MODE_SCAN = "4"
    MODE_FLAP = "5"
    JOG_X_PLUS = "RIGHT"
    JOG_X_MINUS = "LEFT"
    JOG_Y_PLUS = "UP"
    JOG_Y_MINUS = "DOWN"
    START = "#"
    STOP = "*"
    TOGGLE_ENABLE = "0"


_KEY_BY_VALUE = {k.value: k for k in Key}
_KEY_BY_NAME = {k.name: k for k in Key}

_MODE_KEYS = {
    Key.MODE_IDLE: Mode.IDLE,
    Key.MODE_JOG: Mode.JOG,
    Key.MODE_DANCE: Mode.DANCE,
    Key.MODE_SCAN: Mode.SCAN,
    Key.MODE_FLAP: Mode.FLAP,
}

_JOG_KEYS = {
    Key.JOG_X_PLUS: ("X", 1.0),
    Key.JOG_X_MINUS: ("X", -1.0),
    Key.JOG_Y_PLUS: ("Y", 1.0),
    Key.JOG_Y_MINUS: ("Y", -1.0),
}


def parse_key(symbol: str) -> Key:
    key = (
        _KEY_BY_VALUE.get(symbol)
        or _KEY_BY_VALUE.get(symbol.upper())
        or _KEY_BY_NAME.get(symbol.upper())
    )
    if key is None:
        raise UnknownKey(f"key {symbol!r} is not in the keymap")
    return key


# Committed transition table: rule applied for every (mode, key) pair.
# Rules: "mode:<M>" switch, "jog" step move, "start" begin routine/flapper,
# "stop" e-stop, "toggle" motion enable, "reject:<reason>" always rejected.
TRANSITIONS: dict[tuple[Mode, Key], str] = {}
for _m in Mode:
    for _k in Key:
        if _k in _MODE_KEYS:
            TRANSITIONS[(_m, _k)] = f"mode:{_MODE_KEYS[_k].value}"
        elif _k in _JOG_KEYS:
            TRANSITIONS[(_m, _k)] = "jog" if _m is Mode.JOG else "reject:jog only in JOG mode"
        elif _k is Key.START:
            if _m in (Mode.DANCE, Mode.SCAN, Mode.FLAP):
                TRANSITIONS[(_m, _k)] = "start"
            else:
                TRANSITIONS[(_m, _k)] = "reject:nothing to start in this mode"
        elif _k is Key.STOP:
            TRANSITIONS[(_m, _k)] = "stop"
        elif _k is Key.TOGGLE_ENABLE:
            TRANSITIONS[(_m, _k)] = "toggle"


@dataclass(frozen=True)
class KeypadCommand:
    key: Key
    t: float = 0.0


@dataclass(frozen=True)
class ControllerState:
    mode: Mode = Mode.IDLE
    motion_enabled: bool = False
    active_routine: str | None = None
    flapper_hz: float = 0.0

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "motion_enabled": self.motion_enabled,
            "active_routine": self.active_routine,
            "flapper_hz": self.flapper_hz,
        }


@dataclass(frozen=True)
class DispatchResult:
    accepted: bool
    state: ControllerState
    action: str | None = None
    reason: str | None = None


class ExecutionLog:
    """Interleaved pose samples and payload events, one record per tick event."""

    def __init__(self):
        self.records: list[dict] = []
        self.aborted = False

    def add(self, kind: str, t: float, **payload) -> None:
        self.records.append({"t_s": t, "kind": kind, **payload})

    def poses(self):
        import numpy as np

        rows = [
            (r["t_s"], r["x_mm"], r["y_mm"])
            for r in self.records
            if r["kind"] == "pose"
        ]
        return np.asarray(rows)

    def events(self, kind: str | None = None) -> list[dict]:
        return [
            r
            for r in self.records
            if r["kind"] != "pose" and (kind is None or r["kind"] == kind)
        ]

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def __len__(self) -> int:
        return len(self.records)


class _DanceRun:
    """Incremental dance routine: plan playback plus a flapper on/off schedule."""

    def __init__(self, controller: "Controller", plan: TrajectoryPlan,
                 schedule: list[tuple[float, float]] | None, flapper_hz: float):
        self.kind = "dance"
        self.handle: FollowHandle = controller.sim.begin_follow(plan, strict=False)
        self.schedule = schedule if schedule is not None else list(plan.run_spans)
        self.flapper_hz = flapper_hz
        self.flapper_on = False

    @property
    def progress(self) -> float:
        return self.handle.progress

    def tick(self, controller: "Controller", log: ExecutionLog) -> bool:
        """Advance one tick; returns True while the routine keeps running."""
        pose = self.handle.tick()
        if self.handle.aborted:
            if self.flapper_on:
                log.add("flapper_off", pose.t)
                self.flapper_on = False
            for ev in self.handle.endstops:
                log.add("endstop", ev.t, axis=ev.axis, position_mm=ev.position)
            log.add("aborted", pose.t, reason="endstop")
            log.aborted = True
            return False
        start = self.handle.playback_start_t
        if start is not None:
            local = pose.t - start
            want_on = any(a - 1e-9 <= local < b - 1e-9 for a, b in self.schedule)
            if want_on and not self.flapper_on:
                log.add("flapper_on", pose.t, hz=self.flapper_hz)
                self.flapper_on = True
            elif not want_on and self.flapper_on:
                log.add("flapper_off", pose.t)
                self.flapper_on = False
        log.add("pose", pose.t, x_mm=pose.x, y_mm=pose.y)
        if self.handle.done:
            if self.flapper_on:
                log.add("flapper_off", pose.t)
                self.flapper_on = False
            return False
        return True


class _ScanRun:
    """Incremental scan routine: move, settle, capture, expose, repeat."""

    def __init__(self, controller: "Controller", plan: ScanPlan,
                 settle_s: float, exposure_s: float):
        self.kind = "scan"
        self.plan = plan
        self.positions = plan.positions
        self.index = 0
        self.captured = 0
        self.phase = "move"
        self.settle_ticks = max(int(round(settle_s / controller.sim.tick_s)), 1)
        self.exposure_ticks = max(int(round(exposure_s / controller.sim.tick_s)), 0)
        self.counter = 0
        self._commanded = False

    @property
    def progress(self) -> float:
        return self.captured / len(self.positions) if self.positions else 1.0

    def tick(self, controller: "Controller", log: ExecutionLog) -> bool:
        sim = controller.sim
        if self.phase == "move" and not self._commanded:
            if self.index >= len(self.positions):
                return False
            tx, ty = self.positions[self.index]
            sim.command_move(tx, ty)
            self._commanded = True
        pose = sim.step()
        hit = sim.drain_events()
        if hit:
            for ev in hit:
                log.add("endstop", ev.t, axis=ev.axis, position_mm=ev.position)
            log.add("aborted", pose.t, reason="endstop")
            log.aborted = True
            sim.halt()
            return False
        log.add("pose", pose.t, x_mm=pose.x, y_mm=pose.y)

        if self.phase == "move":
            if not sim.busy:
                self.phase = "settle"
                self.counter = 0
        elif self.phase == "settle":
            self.counter += 1
            if self.counter >= self.settle_ticks:
                log.add("capture", pose.t, index=self.index, x_mm=pose.x, y_mm=pose.y)
                self.captured += 1
                self.phase = "expose"
                self.counter = 0
        elif self.phase == "expose":
            self.counter += 1
            if self.counter >= self.exposure_ticks:
                self.index += 1
                if self.index >= len(self.positions):
                    return False
                self.phase = "move"
                self._commanded = False
        return True


class Controller:
    """Owns the simulator; commands are applied strictly in arrival order."""

    def __init__(
        self,
        sim: StageSimulator | None = None,
        dance_params: DanceParams | None = None,
        scan_plan: ScanPlan | None = None,
        flapper_hz: float = DEFAULT_FLAPPER_HZ,
        settle_s: float = SETTLE_S,
        exposure_s: float = DEFAULT_EXPOSURE_S,
    ):
        self.sim = sim or StageSimulator(StageConfig())
        self.dance_params = dance_params or DanceParams(origin=(100.0, 100.0))
        self.scan_plan = scan_plan
        self.set_flapper_hz = flapper_hz
        self.settle_s = settle_s
        self.exposure_s = exposure_s
        self._mode = Mode.IDLE
        self._motion_enabled = False
        self._flapper_hz = 0.0
        self._routine: _DanceRun | _ScanRun | None = None
        self._routine_log: ExecutionLog | None = None
        self._routine_counter = 0
        self.notices: list[dict] = []  # bounded consumer-facing event feed

    @property
    def state(self) -> ControllerState:
        rid = None
        if self._routine is not None:
            rid = f"{self._routine.kind}-{self._routine_counter}"
        return ControllerState(
            mode=self._mode,
            motion_enabled=self._motion_enabled,
            active_routine=rid,
            flapper_hz=self._flapper_hz,
        )

    @property
    def routine_progress(self) -> float:
        if self._routine is None:
            return 1.0
        return self._routine.progress

    @property
    def last_log(self) -> ExecutionLog | None:
        """Execution log of the running or most recently finished routine."""
        return self._routine_log

    def _note(self, kind: str, **payload) -> None:
        self.notices.append({"t_s": self.sim.t, "kind": kind, **payload})
        del self.notices[:-64]

    # -- keypad dispatch ---------------------------------------------------

    def dispatch(self, cmd: KeypadCommand | Key | str) -> DispatchResult:
        if isinstance(cmd, str):
            cmd = KeypadCommand(parse_key(cmd))
        elif isinstance(cmd, Key):
            cmd = KeypadCommand(cmd)
        rule = TRANSITIONS[(self._mode, cmd.key)]

        if rule.startswith("reject:"):
            return self._reject(rule.split(":", 1)[1])
        if rule.startswith("mode:"):
            return self._apply_mode(Mode(rule.split(":", 1)[1]))
        if rule == "jog":
            axis, sign = _JOG_KEYS[cmd.key]
            return self._apply_jog(axis, sign)
        if rule == "start":
            return self._apply_start()
        if rule == "stop":
            return self._apply_stop()
        if rule == "toggle":
            return self._apply_toggle()
        raise AssertionError(f"unhandled rule {rule}")

    def _reject(self, reason: str) -> DispatchResult:
        self._note("rejected", reason=reason)
        return DispatchResult(False, self.state, reason=reason)

    def _apply_mode(self, mode: Mode) -> DispatchResult:
        if self._routine is not None:
            return self._reject("mode locked while a routine is active")
        if self._mode is Mode.FLAP and mode is not Mode.FLAP:
            self._flapper_hz = 0.0
        self._mode = mode
        return DispatchResult(True, self.state, action=f"mode={mode.value}")

    def _apply_jog(self, axis: str, sign: float) -> DispatchResult:
        if self._routine is not None:
            return self._reject("jog locked while a routine is active")
        if not self._motion_enabled:
            return self._reject("motion disabled")
        # Repeated presses extend the current jog target, so held-key repeat
        # accumulates instead of re-planning from an unchanged pose.
        runtime = self.sim._ax if axis == "X" else self.sim._ay
        base = runtime.profile.target if runtime.profile is not None else runtime.pos
        target = base + sign * JOG_STEP_MM
        if axis == "X":
            self.sim.command_move(x=target)
        else:
            self.sim.command_move(y=target)
        return DispatchResult(True, self.state, action=f"jog {axis}{'+' if sign > 0 else '-'}")

    def _apply_start(self) -> DispatchResult:
        if self._routine is not None:
            return self._reject("a routine is already active")
        if self._mode is Mode.FLAP:
            self._flapper_hz = self.set_flapper_hz
            self._note("flapper_on", hz=self._flapper_hz)
            return DispatchResult(True, self.state, action=f"flapper at {self._flapper_hz} Hz")
        if not self._motion_enabled:
            return self._reject("motion disabled")
        if self._mode is Mode.DANCE:
            self._begin_dance(generate(self.dance_params), None)
            return DispatchResult(True, self.state, action="dance routine started")
        if self._mode is Mode.SCAN:
            if self.scan_plan is None:
                return self._reject("no scan plan configured")
            self._begin_scan(self.scan_plan)
            return DispatchResult(True, self.state, action="scan routine started")
        raise AssertionError("start outside DANCE/SCAN/FLAP")

    def _apply_stop(self) -> DispatchResult:
        if self._routine is not None:
            log = self._routine_log
            if log is not None:
                log.add("aborted", self.sim.t, reason="stop")
                log.aborted = True
            self._routine = None
            self._routine_log = None
            self.sim.halt()
            self._note("routine_stopped")
        if self._flapper_hz > 0.0:
            self._note("flapper_off")
        self._flapper_hz = 0.0
        self._motion_enabled = False
        return DispatchResult(True, self.state, action="stopped; motion disabled")

    def _apply_toggle(self) -> DispatchResult:
        if self._routine is not None:
            return self._reject("motion enable locked while a routine is active")
        self._motion_enabled = not self._motion_enabled
        return DispatchResult(
            True, self.state,
            action=f"motion {'enabled' if self._motion_enabled else 'disabled'}",
        )

    # -- routines ----------------------------------------------------------

    def _require_routine_ok(self, mode: Mode) -> None:
        if self._routine is not None:
            raise RejectedTransition("a routine is already active")
        if not self._motion_enabled:
            raise RejectedTransition("motion disabled")
        if self._mode is not mode:
            raise RejectedTransition(f"not in {mode.value} mode")

    def _begin_dance(self, plan: TrajectoryPlan,
                     schedule: list[tuple[float, float]] | None) -> None:
        self._routine_counter += 1
        self._routine = _DanceRun(self, plan, schedule, self.set_flapper_hz)
        self._routine_log = ExecutionLog()
        self._note("routine_started", routine=f"dance-{self._routine_counter}")

    def _begin_scan(self, plan: ScanPlan) -> None:
        self._routine_counter += 1
        self._routine = _ScanRun(self, plan, self.settle_s, self.exposure_s)
        self._routine_log = ExecutionLog()
        self._note("routine_started", routine=f"scan-{self._routine_counter}")

    def start_dance(self, params: DanceParams | None = None,
                    plan: TrajectoryPlan | None = None,
                    payload_schedule: list[tuple[float, float]] | None = None) -> str:
        """Service-facing dance start; raises RejectedTransition when not permitted."""
        self._require_routine_ok(Mode.DANCE)
        if plan is None:
            plan = generate(params or self.dance_params)
        self._begin_dance(plan, payload_schedule)
        return self.state.active_routine

    def start_scan(self, plan: ScanPlan | None = None) -> str:
        self._require_routine_ok(Mode.SCAN)
        plan = plan or self.scan_plan
        if plan is None:
            raise RejectedTransition("no scan plan configured")
        self._begin_scan(plan)
        return self.state.active_routine

    def set_flapper(self, hz: float) -> None:
        """Set the FLAP-mode drive frequency; only FLAP mode may run it."""
        if hz < 0:
            raise RejectedTransition("flapper frequency must be non-negative")
        if hz > 0 and self._mode is not Mode.FLAP:
            raise RejectedTransition("flapper drive only in FLAP mode")
        self.set_flapper_hz = hz if hz > 0 else self.set_flapper_hz
        self._flapper_hz = hz
        self._note("flapper_on" if hz > 0 else "flapper_off", hz=hz)

    def tick(self) -> StagePose:
        """Advance one tick: progress the active routine, else step the stage."""
        if self._routine is not None:
            log = self._routine_log
            keep = self._routine.tick(self, log)
            if not keep:
                self._routine = None
                self._note("routine_done", aborted=log.aborted)
            return self.sim.pose()
        pose = self.sim.step()
        for ev in self.sim.drain_events():
            self._note("endstop", axis=ev.axis, position_mm=ev.position)
        return pose

    def run_routine(
        self,
        routine: TrajectoryPlan | ScanPlan | None = None,
        payload_schedule: list[tuple[float, float]] | None = None,
        max_ticks: int = 50_000_000,
    ) -> ExecutionLog:
        """Run a routine to completion; stage motion and payload events share
        one timebase in the returned log.

        Raises AbortedByEndstop (carrying the partial log) if the stage hits
        a travel limit mid-routine.
        """
        if isinstance(routine, ScanPlan):
            self.start_scan(routine)
        else:
            self.start_dance(plan=routine, payload_schedule=payload_schedule)
        log = self._routine_log
        ticks = 0
        while self._routine is not None:
            self.tick()
            ticks += 1
            if ticks > max_ticks:
                raise RuntimeError("routine did not finish within max_ticks")
        if log.aborted:
            raise AbortedByEndstop("routine hit a travel limit", log)
        return log
