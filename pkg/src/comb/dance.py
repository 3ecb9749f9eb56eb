"""Waggle-dance trajectory generation.

A dance cycle is a straight central run (optionally carrying a lateral
sinusoid) followed by a circular return loop back to the run origin, with
the loop side alternating right/left per cycle so consecutive cycles trace
a figure-eight. Plans are generated in a canonical frame (run along +y
from the origin) and rotated as a whole, which makes rotation equivariance
exact by construction.

Timing is constant speed ``run_speed`` along the whole path. The encoding
of resource distance and direction into run duration and orientation is
deliberately left to the caller: plans here are parameterized directly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import CombError


class DegenerateGeometry(CombError):
    pass


class InvalidDanceParams(CombError):
    pass


@dataclass(frozen=True)
class DanceParams:
    run_length: float = 20.0        # mm
    orientation_deg: float = 0.0    # run axis angle in the stage frame, 0 = +y
    cycles: int = 5
    run_speed: float = 10.0         # mm/s along the path
    lateral_amplitude: float = 0.0  # mm, 0 disables the waggle sinusoid
    lateral_freq: float = 13.0      # Hz, used only when amplitude > 0
    loop_radius: float = 10.0       # mm, must span half the run chord
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.run_length <= 0:
            raise InvalidDanceParams("run_length must be positive")
        if self.cycles < 1:
            raise InvalidDanceParams("cycles must be at least 1")
        if self.run_speed <= 0:
            raise InvalidDanceParams("run_speed must be positive")
        if self.lateral_freq < 0:
            raise InvalidDanceParams("lateral_freq must be non-negative")
        if self.lateral_amplitude < 0:
            raise InvalidDanceParams("lateral_amplitude must be non-negative")
        if self.loop_radius <= self.lateral_amplitude:
            raise InvalidDanceParams("loop_radius must exceed lateral_amplitude")

    @classmethod
    def from_dict(cls, d: dict) -> "DanceParams":
        known = {f: d[f] for f in cls.__dataclass_fields__ if f in d}
        if "origin" in known:
            known["origin"] = tuple(float(v) for v in known["origin"])
        if "cycles" in known:
            known["cycles"] = int(known["cycles"])
        return cls(**known)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["origin"] = list(self.origin)
        return d


@dataclass
class TrajectoryPlan:
    """Timed waypoint sequence; cycle_marks index the waypoint closing each cycle."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    cycle_marks: list[int] = field(default_factory=list)
    run_spans: list[tuple[float, float]] = field(default_factory=list)
    params: DanceParams | None = None

    def __len__(self) -> int:
        return len(self.t)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0]) if len(self.t) else 0.0

    def cycle_bounds(self) -> list[tuple[float, float]]:
        """Start/end times of each cycle."""
        return [
            (float(self.t[self.cycle_marks[i]]), float(self.t[self.cycle_marks[i + 1]]))
            for i in range(len(self.cycle_marks) - 1)
        ]

    def arc_length(self) -> float:
        return float(np.sum(np.hypot(np.diff(self.x), np.diff(self.y))))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t_s,x_mm,y_mm\n")
            for t, x, y in zip(self.t, self.x, self.y):
                fh.write(f"{t:.6f},{x:.9f},{y:.9f}\n")

    @classmethod
    def from_csv(cls, path) -> "TrajectoryPlan":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(t=data[:, 0], x=data[:, 1], y=data[:, 2])

    def to_dict(self) -> dict:
        return {
            "waypoints": [[float(a), float(b), float(c)] for a, b, c in zip(self.t, self.x, self.y)],
            "cycle_marks": list(self.cycle_marks),
            "run_spans": [[float(a), float(b)] for a, b in self.run_spans],
            "params": self.params.to_dict() if self.params else None,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectoryPlan":
        wp = np.asarray(d["waypoints"], dtype=float)
        if wp.size == 0:
            wp = wp.reshape(0, 3)
        return cls(
            t=wp[:, 0],
            x=wp[:, 1],
            y=wp[:, 2],
            cycle_marks=[int(i) for i in d.get("cycle_marks", [])],
            run_spans=[tuple(s) for s in d.get("run_spans", [])],
            params=DanceParams.from_dict(d["params"]) if d.get("params") else None,
        )

    @classmethod
    def from_json(cls, path) -> "TrajectoryPlan":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _run_sample_count(params: DanceParams, base: int) -> int:
    """Samples for the run segment.

    With the lateral sinusoid active, sampling is aligned to quarter-period
    boundaries whenever a whole number of quarter-periods fits the run, so
    waypoints land exactly on the oscillation extremes and zeros.
    """
    t_run = params.run_length / params.run_speed
    if params.lateral_amplitude == 0 or params.lateral_freq == 0:
        return base
    n = max(base, math.ceil(8.0 * params.lateral_freq * t_run))
    quarters = 4.0 * params.lateral_freq * t_run
    if abs(quarters - round(quarters)) < 1e-9 and round(quarters) > 0:
        q = int(round(quarters))
        n = math.ceil(n / q) * q
    return n


def _return_loop(p_end: np.ndarray, p_origin: np.ndarray, radius: float,
                 side: float, n_samples: int) -> tuple[np.ndarray, float]:
    """Arc from the run end back to the cycle origin, bulging to ``side``.

    side is +1 for the right of the canonical run direction (+y), -1 for
    the left. Returns the sampled points (excluding p_end, ending exactly
    on p_origin) and the arc length.
    """
    chord_vec = p_origin - p_end
    chord = float(np.hypot(*chord_vec))
    if 2.0 * radius < chord * (1.0 - 1e-12):
        raise DegenerateGeometry(
            f"loop radius {radius} mm cannot close a {chord:.3f} mm chord"
        )
    mid = (p_end + p_origin) / 2.0
    h = math.sqrt(max(radius * radius - (chord / 2.0) ** 2, 0.0))
    bulge = np.array([side, 0.0])  # right normal of the canonical +y run
    center = mid + h * bulge
    phi_e = math.atan2(p_end[1] - center[1], p_end[0] - center[0])
    phi_o = math.atan2(p_origin[1] - center[1], p_origin[0] - center[0])
    sweep = phi_o - phi_e
    if side > 0:  # clockwise
        while sweep > -1e-12:
            sweep -= 2.0 * math.pi
    else:  # counterclockwise
        while sweep < 1e-12:
            sweep += 2.0 * math.pi
    phis = phi_e + sweep * np.arange(1, n_samples + 1) / n_samples
    pts = center[None, :] + radius * np.stack([np.cos(phis), np.sin(phis)], axis=1)
    pts[-1] = p_origin  # close the cycle exactly
    return pts, radius * abs(sweep)


def generate(params: DanceParams, samples_per_cycle: int = 200) -> TrajectoryPlan:
    """Build the timed waypoint plan for the parameterized dance."""
    n_run = _run_sample_count(params, base=samples_per_cycle // 2)
    n_loop = samples_per_cycle - samples_per_cycle // 2
    t_run = params.run_length / params.run_speed

    origin = np.array([0.0, 0.0])
    ts: list[float] = [0.0]
    pts: list[np.ndarray] = [origin.copy()]
    cycle_marks = [0]
    run_spans: list[tuple[float, float]] = []
    t_cursor = 0.0

    for cycle in range(params.cycles):
        side = 1.0 if cycle % 2 == 0 else -1.0
        run_spans.append((t_cursor, t_cursor + t_run))
        # Waggle run along +y; lateral offset along +x.
        for i in range(1, n_run + 1):
            tau = t_run * i / n_run
            lateral = 0.0
            if params.lateral_amplitude > 0 and params.lateral_freq > 0:
                lateral = params.lateral_amplitude * math.sin(
                    2.0 * math.pi * params.lateral_freq * tau
                )
            pts.append(np.array([lateral, params.run_speed * tau]))
            ts.append(t_cursor + tau)
        p_end = pts[-1]
        loop_pts, loop_len = _return_loop(p_end, origin, params.loop_radius, side, n_loop)
        t_loop = loop_len / params.run_speed
        for i, p in enumerate(loop_pts, start=1):
            pts.append(p)
            ts.append(t_cursor + t_run + t_loop * i / n_loop)
        t_cursor += t_run + t_loop
        cycle_marks.append(len(pts) - 1)

    xy = np.asarray(pts)
    theta = math.radians(params.orientation_deg)
    if theta != 0.0:
        rot = np.array(
            [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
        )
        xy = xy @ rot.T
    xy = xy + np.asarray(params.origin)

    return TrajectoryPlan(
        t=np.asarray(ts),
        x=xy[:, 0],
        y=xy[:, 1],
        cycle_marks=cycle_marks,
        run_spans=run_spans,
        params=params,
    )


def lateral_offsets(plan: TrajectoryPlan, cycle: int = 0) -> np.ndarray:
    """Signed lateral offset of each run-segment waypoint from the run axis.

    Useful as an oracle: zero crossings count oscillation periods.
    """
    if plan.params is None:
        raise ValueError("plan carries no parameters")
    p = plan.params
    t0, t1 = plan.run_spans[cycle]
    mask = (plan.t >= t0 - 1e-12) & (plan.t <= t1 + 1e-12)
    theta = math.radians(p.orientation_deg)
    normal = np.array([math.cos(theta), math.sin(theta)])  # rotated +x
    rel = np.stack([plan.x[mask], plan.y[mask]], axis=1) - np.asarray(p.origin)
    return rel @ normal
