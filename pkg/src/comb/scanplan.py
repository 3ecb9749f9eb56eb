"""Raster scan grid planning for close-range comb imaging.

Overlap is defined as a fraction of the image footprint (not of the
pitch): adjacent tiles share ``overlap * footprint`` of their extent, so
pitch = footprint * (1 - overlap) and n tiles cover
footprint * (1 + (n - 1) * (1 - overlap)).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import CombError
from .stage import AxisConfig, min_move_duration, OutOfTravel


class InvalidScanParams(CombError):
    pass


@dataclass(frozen=True)
class ScanPlan:
    rows: int
    cols: int
    row_overlap: float
    col_overlap: float
    footprint_w: float
    footprint_h: float
    origin: tuple[float, float] = (0.0, 0.0)
    serpentine: bool = True
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise InvalidScanParams("rows and cols must be at least 1")
        for name, ov in (("row_overlap", self.row_overlap), ("col_overlap", self.col_overlap)):
            if not 0.0 <= ov < 1.0:
                raise InvalidScanParams(f"{name} must be in [0, 1), got {ov}")
        if self.footprint_w <= 0 or self.footprint_h <= 0:
            raise InvalidScanParams("footprint dimensions must be positive")

    @property
    def pitch_x(self) -> float:
        return self.footprint_w * (1.0 - self.col_overlap)

    @property
    def pitch_y(self) -> float:
        return self.footprint_h * (1.0 - self.row_overlap)

    @property
    def covered_w(self) -> float:
        return self.footprint_w * (1.0 + (self.cols - 1) * (1.0 - self.col_overlap))

    @property
    def covered_h(self) -> float:
        return self.footprint_h * (1.0 + (self.rows - 1) * (1.0 - self.row_overlap))

    @property
    def grid_indices(self) -> list[tuple[int, int]]:
        """(row, col) per position in acquisition order."""
        out = []
        for r in range(self.rows):
            cols = range(self.cols)
            if self.serpentine and r % 2 == 1:
                cols = reversed(cols)
            out.extend((r, c) for c in cols)
        return out

    @property
    def positions(self) -> list[tuple[float, float]]:
        """Footprint lower-left corners in acquisition order."""
        ox, oy = self.origin
        return [
            (ox + c * self.pitch_x, oy + r * self.pitch_y)
            for r, c in self.grid_indices
        ]

    def position_of(self, row: int, col: int) -> tuple[float, float]:
        ox, oy = self.origin
        return (ox + col * self.pitch_x, oy + row * self.pitch_y)

    def total_travel(self) -> float:
        pos = self.positions
        return sum(
            math.hypot(bx - ax, by - ay)
            for (ax, ay), (bx, by) in zip(pos, pos[1:])
        )

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "row_overlap": self.row_overlap,
            "col_overlap": self.col_overlap,
            "footprint_w": self.footprint_w,
            "footprint_h": self.footprint_h,
            "origin": list(self.origin),
            "serpentine": self.serpentine,
            "flags": list(self.flags),
            "derived": {
                "pitch_x": self.pitch_x,
                "pitch_y": self.pitch_y,
                "covered_w": self.covered_w,
                "covered_h": self.covered_h,
                "n_positions": self.rows * self.cols,
            },
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "ScanPlan":
        return cls(
            rows=int(d["rows"]),
            cols=int(d["cols"]),
            row_overlap=float(d["row_overlap"]),
            col_overlap=float(d["col_overlap"]),
            footprint_w=float(d["footprint_w"]),
            footprint_h=float(d["footprint_h"]),
            origin=tuple(float(v) for v in d.get("origin", (0.0, 0.0))),
            serpentine=bool(d.get("serpentine", True)),
            flags=tuple(d.get("flags", ())),
        )

    @classmethod
    def from_json(cls, path) -> "ScanPlan":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def plan_grid(
    rows: int,
    cols: int,
    footprint_w: float = 40.0,
    footprint_h: float = 30.0,
    row_overlap: float = 0.604,
    col_overlap: float = 0.555,
    origin: tuple[float, float] = (0.0, 0.0),
    serpentine: bool = True,
) -> ScanPlan:
    """Equally pitched grid of imaging positions, serpentine-ordered by default."""
    return ScanPlan(
        rows=rows,
        cols=cols,
        row_overlap=row_overlap,
        col_overlap=col_overlap,
        footprint_w=footprint_w,
        footprint_h=footprint_h,
        origin=origin,
        serpentine=serpentine,
    )


def _count_for_span(span: float, footprint: float, min_overlap: float, limit: int = 10_000) -> int:
    for n in range(1, limit + 1):
        if footprint * (1.0 + (n - 1) * (1.0 - min_overlap)) >= span - 1e-12:
            return n
    raise InvalidScanParams("no tile count covers the requested span")


def _achieved_overlap(span: float, footprint: float, n: int) -> float:
    if n == 1:
        return 0.0
    return 1.0 - (span / footprint - 1.0) / (n - 1)


def plan_for_area(
    area_w: float,
    area_h: float,
    footprint_w: float = 40.0,
    footprint_h: float = 30.0,
    min_overlap: float = 0.5,
    origin: tuple[float, float] = (0.0, 0.0),
    serpentine: bool = True,
) -> ScanPlan:
    """Smallest grid covering the area with at least ``min_overlap``.

    The achieved overlap is recomputed from the chosen counts so the grid
    covers the area exactly. A footprint larger than the area yields a
    single flagged position rather than an error.
    """
    if not 0.0 <= min_overlap < 1.0:
        raise InvalidScanParams(f"min_overlap must be in [0, 1), got {min_overlap}")
    if area_w <= 0 or area_h <= 0:
        raise InvalidScanParams("area dimensions must be positive")
    flags = []
    if footprint_w > area_w or footprint_h > area_h:
        flags.append("FootprintTooLarge")
    cols = _count_for_span(area_w, footprint_w, min_overlap)
    rows = _count_for_span(area_h, footprint_h, min_overlap)
    col_overlap = max(_achieved_overlap(area_w, footprint_w, cols), 0.0)
    row_overlap = max(_achieved_overlap(area_h, footprint_h, rows), 0.0)
    return ScanPlan(
        rows=rows,
        cols=cols,
        row_overlap=row_overlap,
        col_overlap=col_overlap,
        footprint_w=footprint_w,
        footprint_h=footprint_h,
        origin=origin,
        serpentine=serpentine,
        flags=tuple(flags),
    )


@dataclass(frozen=True)
class TransitionTiming:
    index: int                       # transition from position index to index+1
    distance: float
    move_s: float
    total_s: float                   # move + settle + exposure
    row_change: bool


@dataclass(frozen=True)
class TimingReport:
    transitions: tuple[TransitionTiming, ...]
    settle_s: float
    exposure_s: float
    total_s: float
    mean_row_transition_s: float
    mean_col_transition_s: float

    def to_dict(self) -> dict:
        return {
            "settle_s": self.settle_s,
            "exposure_s": self.exposure_s,
            "total_s": self.total_s,
            "mean_row_transition_s": self.mean_row_transition_s,
            "mean_col_transition_s": self.mean_col_transition_s,
            "n_transitions": len(self.transitions),
        }


def estimate_timing(
    plan: ScanPlan,
    cfg: AxisConfig | None = None,
    settle_s: float = 0.1,
    exposure_s: float = 10.0,
    cfg_y: AxisConfig | None = None,
) -> TimingReport:
    """Per-transition durations from stage kinematics plus the capture budget.

    The default settle + exposure budget models hold-still time plus image
    capture and on-board storage; with the default stage it puts the mean
    row-to-row transition near 10.5 s. Total time includes the exposure at
    the first position.
    """
    cfg = cfg or AxisConfig()
    cfg_y = cfg_y or cfg
    positions = plan.positions
    for px, py in positions:
        if not (cfg.in_travel(px) and cfg.in_travel(px + plan.footprint_w)):
            raise OutOfTravel(f"scan x position {px} mm outside travel")
        if not (cfg_y.in_travel(py) and cfg_y.in_travel(py + plan.footprint_h)):
            raise OutOfTravel(f"scan y position {py} mm outside travel")
    grid = plan.grid_indices
    transitions = []
    for i, ((ax, ay), (bx, by)) in enumerate(zip(positions, positions[1:])):
        move = max(
            min_move_duration(bx - ax, cfg),
            min_move_duration(by - ay, cfg_y),
        )
        transitions.append(
            TransitionTiming(
                index=i,
                distance=math.hypot(bx - ax, by - ay),
                move_s=move,
                total_s=move + settle_s + exposure_s,
                row_change=grid[i][0] != grid[i + 1][0],
            )
        )
    row_ts = [tr.total_s for tr in transitions if tr.row_change]
    col_ts = [tr.total_s for tr in transitions if not tr.row_change]
    total = exposure_s + sum(tr.total_s for tr in transitions)
    return TimingReport(
        transitions=tuple(transitions),
        settle_s=settle_s,
        exposure_s=exposure_s,
        total_s=total,
        mean_row_transition_s=sum(row_ts) / len(row_ts) if row_ts else 0.0,
        mean_col_transition_s=sum(col_ts) / len(col_ts) if col_ts else 0.0,
    )
