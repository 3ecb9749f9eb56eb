"""Deterministic two-axis stepper stage simulation.

Determinism contract: simulation time is an integer tick count (t = n * tick_s),
positions are evaluated from closed-form motion profiles as IEEE-754 doubles
at each tick and quantized to the step grid. There is no incremental
integration, so identical configs and plans produce bit-identical pose logs
on any platform.

Two execution regimes coexist:

* Profile moves (jog, scan transitions): trapezoidal velocity with exact
  closed-form timing; speed and acceleration stay within the axis limits
  at every tick by construction.
* Plan playback (``follow``): a timed waypoint plan is the commanded truth
  and is tracked by per-tick linear interpolation. Segments that demand
  more than ``v_max`` are re-timed to the kinematic minimum and executed
  as profile moves; this is reported, not raised. Acceleration demanded by
  corners in the plan is the plan author's responsibility and is not
  smoothed, because faithful phase-accurate playback is the contract the
  analysis pipeline depends on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CombError

DEFAULT_TICK_S = 0.001
CONTACT_EPS = 1e-9  # limit overshoot below this is float residue, not contact


class OutOfTravel(CombError):
    pass


class BadTick(CombError):
    pass


@dataclass(frozen=True)
class AxisConfig:
    steps_per_mm: float = 80.0
    v_max: float = 50.0
    a_max: float = 200.0
    travel_min: float = 0.0
    travel_max: float = 200.0

    def __post_init__(self):
        if self.steps_per_mm <= 0:
            raise ValueError("steps_per_mm must be positive")
        if self.v_max <= 0 or self.a_max <= 0:
            raise ValueError("v_max and a_max must be positive")
        if not self.travel_min < self.travel_max:
            raise ValueError("travel_min must be below travel_max")

    @property
    def step_pitch(self) -> float:
        return 1.0 / self.steps_per_mm

    def quantize(self, position: float) -> float:
        return round(position * self.steps_per_mm) / self.steps_per_mm

    def in_travel(self, position: float, slack: float = 1e-9) -> bool:
        return self.travel_min - slack <= position <= self.travel_max + slack


@dataclass(frozen=True)
class StageConfig:
    x: AxisConfig = field(default_factory=AxisConfig)
    y: AxisConfig = field(default_factory=AxisConfig)
    tick_s: float = DEFAULT_TICK_S

    def __post_init__(self):
        if self.tick_s <= 0:
            raise ValueError("tick_s must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "StageConfig":
        axis_keys = ("steps_per_mm", "v_max", "a_max", "travel_min", "travel_max")
        shared = {k: float(d[k]) for k in axis_keys if k in d}
        ax = AxisConfig(**{**shared, **{k: float(v) for k, v in d.get("x", {}).items()}})
        ay = AxisConfig(**{**shared, **{k: float(v) for k, v in d.get("y", {}).items()}})
        return cls(x=ax, y=ay, tick_s=float(d.get("tick_s", DEFAULT_TICK_S)))


@dataclass(frozen=True)
class StagePose:
    x: float
    y: float
    t: float


@dataclass(frozen=True)
class EndstopEvent:
    axis: str       # "X" or "Y"
    position: float  # travel_min or travel_max of that axis
    t: float


@dataclass(frozen=True)
class MotionProfile:
    """Closed-form trapezoidal (or triangular) point-to-point profile."""

    start: float
    target: float
    distance: float
    direction: float
    v_peak: float
    a: float
    t_accel: float
    t_cruise: float
    duration: float

    def position(self, tau: float) -> float:
        if tau <= 0.0:
            return self.start
        if tau >= self.duration:
            return self.target
        ta, tc, a, v = self.t_accel, self.t_cruise, self.a, self.v_peak
        if tau < ta:
            s = 0.5 * a * tau * tau
        elif tau < ta + tc:
            s = 0.5 * a * ta * ta + v * (tau - ta)
        else:
            remaining = self.duration - tau
            s = self.distance - 0.5 * a * remaining * remaining
        return self.start + self.direction * s

    def velocity(self, tau: float) -> float:
        if tau <= 0.0 or tau >= self.duration:
            return 0.0
        ta, tc, a = self.t_accel, self.t_cruise, self.a
        if tau < ta:
            v = a * tau
        elif tau < ta + tc:
            v = self.v_peak
        else:
            v = a * (self.duration - tau)
        return self.direction * v


def min_move_duration(distance: float, cfg: AxisConfig) -> float:
    """Fastest point-to-point time for ``distance`` with rest at both ends."""
    d = abs(distance)
    if d == 0.0:
        return 0.0
    if d >= cfg.v_max * cfg.v_max / cfg.a_max:
        return 2.0 * cfg.v_max / cfg.a_max + (d - cfg.v_max * cfg.v_max / cfg.a_max) / cfg.v_max
    return 2.0 * math.sqrt(d / cfg.a_max)


def _build_profile(start: float, target: float, cfg: AxisConfig, duration: float | None = None) -> MotionProfile:
    """Profile from start to target; optionally stretched to a longer duration.

    Stretching keeps a = a_max and lowers the cruise speed (smaller root of
    v^2 - T*a*v + d*a = 0), so limits hold for any feasible duration.
    """
    d = abs(target - start)
    direction = 0.0 if d == 0.0 else math.copysign(1.0, target - start)
    t_min = min_move_duration(d, cfg)
    if d == 0.0:
        dur = duration if duration is not None else 0.0
        return MotionProfile(start, target, 0.0, 0.0, 0.0, cfg.a_max, 0.0, dur, dur)
    if duration is None or duration <= t_min + 1e-12:
        duration = t_min
        v_peak = min(cfg.v_max, math.sqrt(d * cfg.a_max))
    else:
        a = cfg.a_max
        disc = duration * duration * a * a - 4.0 * d * a
        v_peak = (duration * a - math.sqrt(max(disc, 0.0))) / 2.0
        v_peak = min(v_peak, cfg.v_max)
    t_accel = v_peak / cfg.a_max
    t_cruise = max(duration - 2.0 * t_accel, 0.0)
    return MotionProfile(start, target, d, direction, v_peak, cfg.a_max, t_accel, t_cruise, duration)


def plan_move(start: float, target: float, cfg: AxisConfig) -> MotionProfile:
    """Trapezoidal profile between two in-travel positions, v = 0 at both ends."""
    for label, pos in (("start", start), ("target", target)):
        if not cfg.in_travel(pos):
            raise OutOfTravel(
                f"{label} {pos} mm outside [{cfg.travel_min}, {cfg.travel_max}] mm"
            )
    return _build_profile(start, cfg.quantize(target), cfg)


@dataclass
class InfeasibleTiming:
    """A plan segment demanded more than the axis can do; it was re-timed."""

    segment: int
    requested_s: float
    executed_s: float
    demanded_speed: float
    axis: str


class PoseLog:
    """Tick-resolution samples of the carriage pose plus events and warnings."""

    def __init__(self):
        self._t: list[float] = []
        self._x: list[float] = []
        self._y: list[float] = []
        self.events: list[EndstopEvent] = []
        self.warnings: list[InfeasibleTiming] = []
        self.aborted = False
        self.playback_start_t = 0.0

    def append(self, pose: StagePose) -> None:
        self._t.append(pose.t)
        self._x.append(pose.x)
        self._y.append(pose.y)

    def __len__(self) -> int:
        return len(self._t)

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self._t)

    @property
    def x(self) -> np.ndarray:
        return np.asarray(self._x)

    @property
    def y(self) -> np.ndarray:
        return np.asarray(self._y)

    def final_pose(self) -> StagePose:
        return StagePose(self._x[-1], self._y[-1], self._t[-1])

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t_s,x_mm,y_mm\n")
            for t, x, y in zip(self._t, self._x, self._y):
                fh.write(f"{t:.6f},{x:.7f},{y:.7f}\n")

    @classmethod
    def from_csv(cls, path) -> "PoseLog":
        log = cls()
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        log._t = data[:, 0].tolist()
        log._x = data[:, 1].tolist()
        log._y = data[:, 2].tolist()
        return log


class _AxisRuntime:
    def __init__(self, name: str, cfg: AxisConfig, start: float):
        self.name = name
        self.cfg = cfg
        self.pos = cfg.quantize(start)
        self.profile: MotionProfile | None = None
        self.profile_start_t = 0.0
        self.at_limit = False

    @property
    def moving(self) -> bool:
        return self.profile is not None

    def begin(self, profile: MotionProfile, t_now: float) -> None:
        self.profile = profile
        self.profile_start_t = t_now
        self.at_limit = False

    def halt(self) -> None:
        self.profile = None

    def advance(self, t_next: float) -> EndstopEvent | None:
        """Evaluate position at t_next; clamp and halt on limit contact.

        Contact needs to exceed the limit by more than float residue:
        paths are allowed to touch the boundary exactly.
        """
        if self.profile is None:
            return None
        tau = t_next - self.profile_start_t
        ideal = self.profile.position(tau)
        event = None
        if ideal < self.cfg.travel_min - CONTACT_EPS or ideal > self.cfg.travel_max + CONTACT_EPS:
            limit = self.cfg.travel_min if ideal < self.cfg.travel_min else self.cfg.travel_max
            self.pos = limit
            self.profile = None
            if not self.at_limit:
                self.at_limit = True
                event = EndstopEvent(self.name, limit, t_next)
            return event
        if tau >= self.profile.duration:
            self.pos = self.cfg.quantize(self.profile.target)
            self.profile = None
        else:
            self.pos = self.cfg.quantize(ideal)
        return event


class StageSimulator:
    """Single-threaded deterministic tick-loop simulator of the XY carriage.

    External callers interact through commands issued between ticks; the
    core is never entered concurrently.
    """

    def __init__(self, config: StageConfig | None = None, start: tuple[float, float] = (0.0, 0.0)):
        self.config = config or StageConfig()
        self._tick_index = 0
        self._ax = _AxisRuntime("X", self.config.x, start[0])
        self._ay = _AxisRuntime("Y", self.config.y, start[1])
        self.events: list[EndstopEvent] = []

    @property
    def tick_s(self) -> float:
        return self.config.tick_s

    @property
    def t(self) -> float:
        return self._tick_index * self.config.tick_s

    @property
    def busy(self) -> bool:
        return self._ax.moving or self._ay.moving

    def pose(self) -> StagePose:
        return StagePose(self._ax.pos, self._ay.pos, self.t)

    def drain_events(self) -> list[EndstopEvent]:
        out, self.events = self.events, []
        return out

    def command_move(self, x: float | None = None, y: float | None = None) -> None:
        """Start simultaneous per-axis trapezoid moves toward the targets.

        Targets are not validated against travel: motion past a limit halts
        at the end-stop and raises an event, mirroring the hardware safety
        layer. Use plan_move for validated profiles.
        """
        t_now = self.t
        if x is not None:
            self._ax.begin(_build_profile(self._ax.pos, x, self.config.x), t_now)
        if y is not None:
            self._ay.begin(_build_profile(self._ay.pos, y, self.config.y), t_now)

    def halt(self) -> None:
        self._ax.halt()
        self._ay.halt()

    def step(self, dt: float | None = None) -> StagePose:
        """Advance exactly one tick. dt, when given, must equal the configured tick."""
        if dt is not None and abs(dt - self.config.tick_s) > 1e-15:
            raise BadTick(f"dt {dt} != configured tick {self.config.tick_s}")
        self._tick_index += 1
        t_next = self.t
        for axis in (self._ax, self._ay):
            event = axis.advance(t_next)
            if event is not None:
                self.events.append(event)
        return self.pose()

    def run_until_idle(self, max_ticks: int = 10_000_000, log: PoseLog | None = None) -> int:
        """Step until both axes are idle; returns the number of ticks taken."""
        taken = 0
        while self.busy:
            pose = self.step()
            if log is not None:
                log.append(pose)
            taken += 1
            if taken > max_ticks:
                raise RuntimeError("stage did not come to rest within max_ticks")
        return taken

    def begin_follow(self, plan, strict: bool = True) -> "FollowHandle":
        return FollowHandle(self, plan, strict=strict)

    def follow(self, plan, strict: bool = True) -> PoseLog:
        """Execute a timed waypoint plan; returns the tick-resolution pose log.

        With strict=True every waypoint must lie within travel (OutOfTravel
        otherwise). With strict=False limit contact aborts playback, leaving
        a partial log flagged aborted.
        """
        handle = self.begin_follow(plan, strict=strict)
        log = PoseLog()
        log.warnings = handle.warnings
        if handle._empty:
            return log
        log.append(self.pose())
        while not handle.done:
            log.append(handle.tick())
        if handle.playback_start_t is not None:
            log.playback_start_t = handle.playback_start_t
        log.events.extend(handle.endstops)
        log.aborted = handle.aborted
        return log


class FollowHandle:
    """Incremental executor for a timed waypoint plan.

    Drives the stage one tick at a time so a caller (the controller loop)
    can interleave payload events and abort handling. The plan's timestamps
    are honored exactly for feasible segments; over-speed segments run as
    profile moves at the kinematic minimum.
    """

    def __init__(self, sim: StageSimulator, plan, strict: bool = True):
        t = np.asarray(plan.t, dtype=float)
        x = np.asarray(plan.x, dtype=float)
        y = np.asarray(plan.y, dtype=float)
        if len(t) != len(x) or len(t) != len(y):
            raise ValueError("plan arrays must have equal length")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("plan timestamps must be strictly increasing")
        self.sim = sim
        self.warnings: list[InfeasibleTiming] = []
        self.endstops: list[EndstopEvent] = []
        self.aborted = False
        self._empty = len(t) == 0

        if self._empty:
            self.playback_start_t = sim.t
            self._total_ticks = 0
            self._done_ticks = 0
            return

        if strict:
            for cx, cfg in ((x, sim.config.x), (y, sim.config.y)):
                bad = [v for v in cx if not cfg.in_travel(v)]
                if bad:
                    raise OutOfTravel(f"waypoint at {bad[0]} mm outside travel")

        # Transit to the first waypoint with a profile move before playback.
        pose = sim.pose()
        needs_transit = (
            abs(pose.x - x[0]) > sim.config.x.step_pitch / 2
            or abs(pose.y - y[0]) > sim.config.y.step_pitch / 2
        )
        self._transit_pending = needs_transit
        self._x = x
        self._y = y
        self._plan_t = t

        # Executed segment schedule: start times re-based to playback t=0.
        seg_exec: list[tuple[float, float, int, MotionProfile | None, MotionProfile | None]] = []
        t_cursor = 0.0
        for i in range(len(t) - 1):
            dt_req = t[i + 1] - t[i]
            dx = x[i + 1] - x[i]
            dy = y[i + 1] - y[i]
            sx = abs(dx) / dt_req
            sy = abs(dy) / dt_req
            feasible = sx <= sim.config.x.v_max + 1e-9 and sy <= sim.config.y.v_max + 1e-9
            if feasible:
                seg_exec.append((t_cursor, dt_req, i, None, None))
                t_cursor += dt_req
            else:
                t_min = max(
                    min_move_duration(dx, sim.config.x),
                    min_move_duration(dy, sim.config.y),
                )
                axis, speed = ("X", sx) if sx / sim.config.x.v_max >= sy / sim.config.y.v_max else ("Y", sy)
                self.warnings.append(
                    InfeasibleTiming(i, dt_req, t_min, max(sx, sy), axis)
                )
                px = _build_profile(x[i], x[i + 1], sim.config.x, t_min)
                py = _build_profile(y[i], y[i + 1], sim.config.y, t_min)
                seg_exec.append((t_cursor, t_min, i, px, py))
                t_cursor += t_min
        self._segments = seg_exec
        self._total_playback = t_cursor
        self._seg_ptr = 0
        self.playback_start_t = None  # set once transit completes
        self._playback_ticks = max(int(math.ceil(t_cursor / sim.tick_s - 1e-9)), 0)
        self._played = 0
        if not needs_transit:
            self.playback_start_t = sim.t

    @property
    def done(self) -> bool:
        if self._empty or self.aborted:
            return True
        return self.playback_start_t is not None and self._played >= self._playback_ticks

    @property
    def progress(self) -> float:
        if self._empty:
            return 1.0
        if self.playback_start_t is None or self._playback_ticks == 0:
            return 1.0 if self.done else 0.0
        return min(self._played / self._playback_ticks, 1.0)

    def _position_at(self, tau: float) -> tuple[float, float]:
        """Ideal (unquantized) plan position at playback time tau."""
        while (
            self._seg_ptr + 1 < len(self._segments)
            and tau >= self._segments[self._seg_ptr][0] + self._segments[self._seg_ptr][1]
        ):
            self._seg_ptr += 1
        if not self._segments:
            return self._x[0], self._y[0]
        start, dur, i, px, py = self._segments[self._seg_ptr]
        local = tau - start
        if local >= dur:
            return self._x[i + 1], self._y[i + 1]
        if px is not None:
            return px.position(local), py.position(local)
        frac = local / dur
        return (
            self._x[i] + (self._x[i + 1] - self._x[i]) * frac,
            self._y[i] + (self._y[i + 1] - self._y[i]) * frac,
        )

    def tick(self) -> StagePose:
        sim = self.sim
        if self._empty or self.done:
            return sim.step()

        if self._transit_pending:
            if not sim.busy and self.playback_start_t is None:
                sim.command_move(self._x[0], self._y[0])
            pose = sim.step()
            hit = sim.drain_events()
            if hit:
                self.endstops.extend(hit)
                self.aborted = True
                sim.halt()
                return pose
            if not sim.busy:
                self._transit_pending = False
                self.playback_start_t = sim.t
            return pose

        self._played += 1
        tau = self._played * sim.tick_s
        if self._played >= self._playback_ticks:
            ix, iy = self._x[-1], self._y[-1]
        else:
            ix, iy = self._position_at(tau)
        return self._apply(ix, iy)

    def _apply(self, ix: float, iy: float) -> StagePose:
        sim = self.sim
        sim._tick_index += 1
        t_now = sim.t
        hit = []
        for axis, ideal in ((sim._ax, ix), (sim._ay, iy)):
            if (
                ideal < axis.cfg.travel_min - CONTACT_EPS
                or ideal > axis.cfg.travel_max + CONTACT_EPS
            ):
                limit = axis.cfg.travel_min if ideal < axis.cfg.travel_min else axis.cfg.travel_max
                axis.pos = limit
                hit.append(EndstopEvent(axis.name, limit, t_now))
            else:
                axis.pos = min(max(axis.cfg.quantize(ideal), axis.cfg.travel_min), axis.cfg.travel_max)
        if hit:
            self.endstops.extend(hit)
            sim.events.extend(hit)
            self.aborted = True
        return sim.pose()
