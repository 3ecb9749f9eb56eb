"""Trajectory tracking analysis: calibration, cycle normalization, error decomposition.

Pipeline: tracked image-space runs are converted to millimeters with a
px/mm calibration factor, resampled onto a uniform phase grid over one
dance cycle, optionally averaged across runs, and compared against the
commanded path. The error vector at each phase splits into a cross-track
component (along the commanded-path normal), an along-track component
(along the tangent), and the Euclidean magnitude.

Errors are matched by phase (same index after temporal normalization),
which makes the along-track component well defined; a nearest-point
projection mode is available for the cross-track component as a
documented alternative.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CombError


class TooFewSamples(CombError):
    pass


class GridMismatch(CombError):
    pass


class DegenerateTangent(CombError):
    pass


class InvalidCalibration(CombError):
    pass


@dataclass(frozen=True)
class CalibrationSpec:
    px_per_mm: float = 5.48

    def __post_init__(self):
        if self.px_per_mm <= 0:
            raise InvalidCalibration("px_per_mm must be positive")


@dataclass
class TrackedRun:
    """Time-stamped point track, either in pixels (u, v) or millimeters."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    unit: str = "px"

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if len(self.t) < 2:
            raise TooFewSamples("a tracked run needs at least 2 samples")
        if not np.all(np.diff(self.t) > 0):
            raise ValueError("timestamps must be strictly increasing")

    @classmethod
    def from_csv(cls, path, unit: str = "px") -> "TrackedRun":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(t=data[:, 0], x=data[:, 1], y=data[:, 2], unit=unit)

    def to_csv(self, path) -> None:
        suffix = "px" if self.unit == "px" else "mm"
        with open(path, "w") as fh:
            fh.write(f"t_s,u_{suffix},v_{suffix}\n" if suffix == "px" else "t_s,x_mm,y_mm\n")
            for t, x, y in zip(self.t, self.x, self.y):
                fh.write(f"{t:.6f},{x:.9f},{y:.9f}\n")


@dataclass
class NormalizedRun:
    """Run resampled onto a uniform phase grid in [0, 1)."""

    phase: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.phase = np.asarray(self.phase, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)


@dataclass
class AveragedPath:
    phase: np.ndarray
    mean_x: np.ndarray
    mean_y: np.ndarray
    sd_x: np.ndarray
    sd_y: np.ndarray


@dataclass
class ErrorReport:
    cte_rms: float
    cte_max: float
    ate_rms: float
    ate_max: float
    euclid_rms: float
    euclid_max: float
    n_runs: int
    n_phases: int
    excluded_phases: list[int] = field(default_factory=list)
    per_phase: dict = field(default_factory=dict)  # phase -> rms series for plotting

    def to_dict(self) -> dict:
        return {
            "cte_rms_mm": self.cte_rms,
            "cte_max_mm": self.cte_max,
            "ate_rms_mm": self.ate_rms,
            "ate_max_mm": self.ate_max,
            "euclid_rms_mm": self.euclid_rms,
            "euclid_max_mm": self.euclid_max,
            "n_runs": self.n_runs,
            "n_phases": self.n_phases,
            "n_excluded_phases": len(self.excluded_phases),
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def per_phase_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("phase,cte_rms_mm,ate_rms_mm,euclid_rms_mm\n")
            for row in zip(
                self.per_phase["phase"],
                self.per_phase["cte_rms"],
                self.per_phase["ate_rms"],
                self.per_phase["euclid_rms"],
            ):
                fh.write(",".join(f"{v:.9f}" for v in row) + "\n")


def calibrate(run: TrackedRun, cal: CalibrationSpec) -> TrackedRun:
    """Convert a pixel-space track to millimeters."""
    return TrackedRun(
        t=run.t,
        x=run.x / cal.px_per_mm,
        y=run.y / cal.px_per_mm,
        unit="mm",
    )


def normalize_cycle(
    run: TrackedRun,
    n_samples: int = 500,
    t_start: float | None = None,
    t_end: float | None = None,
) -> NormalizedRun:
    """Resample one cycle onto ``n_samples`` uniform phases by linear interpolation.

    Cycle bounds default to the run's full time span; pass explicit bounds
    when the run covers more than one cycle.
    """
    if n_samples < 2:
        raise TooFewSamples("need at least 2 phase samples")
    t0 = run.t[0] if t_start is None else float(t_start)
    t1 = run.t[-1] if t_end is None else float(t_end)
    if t1 <= t0:
        raise ValueError("cycle end must follow cycle start")
    phase = np.arange(n_samples) / n_samples
    ts = t0 + phase * (t1 - t0)
    return NormalizedRun(
        phase=phase,
        x=np.interp(ts, run.t, run.x),
        y=np.interp(ts, run.t, run.y),
    )


def split_cycles(run: TrackedRun, cycle_times: list[float]) -> list[TrackedRun]:
    """Cut a multi-cycle run at the given boundary times.

    Boundary samples are shared between neighboring cycles the same way
    the plan shares its closing waypoints.
    """
    if len(cycle_times) < 2:
        raise ValueError("need at least one cycle (two boundary times)")
    out = []
    for a, b in zip(cycle_times, cycle_times[1:]):
        mask = (run.t >= a - 1e-9) & (run.t <= b + 1e-9)
        if mask.sum() < 2:
            raise TooFewSamples(f"cycle [{a}, {b}] covers fewer than 2 samples")
        out.append(TrackedRun(t=run.t[mask], x=run.x[mask], y=run.y[mask], unit=run.unit))
    return out


def resample_path(t: np.ndarray, x: np.ndarray, y: np.ndarray,
                  n_samples: int = 500,
                  t_start: float | None = None,
                  t_end: float | None = None) -> NormalizedRun:
    """Normalize an arbitrary timed path (e.g. a commanded plan cycle)."""
    return normalize_cycle(TrackedRun(t=t, x=x, y=y, unit="mm"), n_samples, t_start, t_end)


def _tangents(c: NormalizedRun) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unit tangents of the commanded path: central differences inside,
    one-sided at the ends. Returns (tx, ty, degenerate_mask)."""
    x, y = c.x, c.y
    n = len(x)
    dx = np.empty(n)
    dy = np.empty(n)
    dx[1:-1] = x[2:] - x[:-2]
    dy[1:-1] = y[2:] - y[:-2]
    dx[0] = x[1] - x[0]
    dy[0] = y[1] - y[0]
    dx[-1] = x[-1] - x[-2]
    dy[-1] = y[-1] - y[-2]
    norm = np.hypot(dx, dy)
    scale = max(float(np.max(norm)), 1.0)
    degenerate = norm < 1e-12 * scale
    safe = np.where(degenerate, 1.0, norm)
    return dx / safe, dy / safe, degenerate


def decompose_errors(
    measured: NormalizedRun | list[NormalizedRun],
    commanded: NormalizedRun,
    cte_mode: str = "phase",
) -> ErrorReport:
    """Cross-track / along-track / Euclidean error statistics.

    Multiple runs are pooled: per-phase errors from every run feed one RMS.
    Phases where the commanded path is stationary have no tangent and are
    excluded (reported in the result).

    cte_mode "phase" uses the tangent at the matched phase; "projection"
    replaces the cross-track magnitude with the unsigned distance to the
    nearest point of the commanded polyline.
    """
    runs = measured if isinstance(measured, list) else [measured]
    if not runs:
        raise ValueError("no measured runs given")
    for r in runs:
        if len(r.phase) != len(commanded.phase) or not np.allclose(
            r.phase, commanded.phase, atol=1e-12
        ):
            raise GridMismatch("measured and commanded phase grids differ")
    if cte_mode not in ("phase", "projection"):
        raise ValueError(f"unknown cte_mode {cte_mode!r}")

    tx, ty, degenerate = _tangents(commanded)
    if degenerate.all():
        raise DegenerateTangent("commanded path is entirely stationary")
    keep = ~degenerate
    nx, ny = -ty, tx  # left normal; sign convention only affects signed CTE

    cte_all, ate_all, euc_all = [], [], []
    for r in runs:
        ex = r.x - commanded.x
        ey = r.y - commanded.y
        cte = ex * nx + ey * ny
        ate = ex * tx + ey * ty
        euc = np.hypot(ex, ey)
        if cte_mode == "projection":
            cte = _projection_distance(r, commanded)
        cte_all.append(cte[keep])
        ate_all.append(ate[keep])
        euc_all.append(euc[keep])

    cte_pooled = np.concatenate(cte_all)
    ate_pooled = np.concatenate(ate_all)
    euc_pooled = np.concatenate(euc_all)

    cte_stack = np.stack(cte_all)
    ate_stack = np.stack(ate_all)
    euc_stack = np.stack(euc_all)
    per_phase = {
        "phase": commanded.phase[keep],
        "cte_rms": np.sqrt(np.mean(cte_stack**2, axis=0)),
        "ate_rms": np.sqrt(np.mean(ate_stack**2, axis=0)),
        "euclid_rms": np.sqrt(np.mean(euc_stack**2, axis=0)),
    }

    return ErrorReport(
        cte_rms=float(np.sqrt(np.mean(cte_pooled**2))),
        cte_max=float(np.max(np.abs(cte_pooled))),
        ate_rms=float(np.sqrt(np.mean(ate_pooled**2))),
        ate_max=float(np.max(np.abs(ate_pooled))),
        euclid_rms=float(np.sqrt(np.mean(euc_pooled**2))),
        euclid_max=float(np.max(euc_pooled)),
        n_runs=len(runs),
        n_phases=int(keep.sum()),
        excluded_phases=np.flatnonzero(degenerate).tolist(),
        per_phase=per_phase,
    )


def _projection_distance(r: NormalizedRun, c: NormalizedRun) -> np.ndarray:
    """Unsigned distance from each measured point to the commanded polyline."""
    px = np.stack([r.x, r.y], axis=1)
    a = np.stack([c.x[:-1], c.y[:-1]], axis=1)
    b = np.stack([c.x[1:], c.y[1:]], axis=1)
    ab = b - a
    ab_len2 = np.sum(ab**2, axis=1)
    ab_len2 = np.where(ab_len2 == 0.0, 1.0, ab_len2)
    out = np.empty(len(px))
    for i, p in enumerate(px):
        ap = p[None, :] - a
        s = np.clip(np.sum(ap * ab, axis=1) / ab_len2, 0.0, 1.0)
        closest = a + s[:, None] * ab
        out[i] = np.min(np.hypot(*(p[None, :] - closest).T))
    return out


def pool_reports(reports: list[ErrorReport]) -> ErrorReport:
    """Combine per-group error reports into one pooled RMS/max report.

    Used when measured cycles are compared against different commanded
    cycles (the return loop alternates sides) but one aggregate is wanted.
    """
    if not reports:
        raise ValueError("no reports to pool")
    if len(reports) == 1:
        return reports[0]
    weights = np.array([r.n_runs * r.n_phases for r in reports], dtype=float)
    total = weights.sum()

    def rms(attr):
        return float(np.sqrt(sum(getattr(r, attr) ** 2 * w for r, w in zip(reports, weights)) / total))

    per_phase: dict = {}
    grids = [r.per_phase.get("phase") for r in reports]
    if all(g is not None and len(g) == len(grids[0]) and np.array_equal(g, grids[0]) for g in grids):
        run_w = np.array([r.n_runs for r in reports], dtype=float)
        per_phase["phase"] = grids[0]
        for key in ("cte_rms", "ate_rms", "euclid_rms"):
            stacked = np.stack([r.per_phase[key] ** 2 * w for r, w in zip(reports, run_w)])
            per_phase[key] = np.sqrt(stacked.sum(axis=0) / run_w.sum())

    return ErrorReport(
        cte_rms=rms("cte_rms"),
        cte_max=max(r.cte_max for r in reports),
        ate_rms=rms("ate_rms"),
        ate_max=max(r.ate_max for r in reports),
        euclid_rms=rms("euclid_rms"),
        euclid_max=max(r.euclid_max for r in reports),
        n_runs=sum(r.n_runs for r in reports),
        n_phases=reports[0].n_phases,
        excluded_phases=sorted({p for r in reports for p in r.excluded_phases}),
        per_phase=per_phase,
    )


def average_runs(runs: list[NormalizedRun]) -> AveragedPath:
    """Per-phase mean path and population standard deviation across runs."""
    if not runs:
        raise ValueError("no runs given")
    base = runs[0].phase
    for r in runs[1:]:
        if len(r.phase) != len(base) or not np.allclose(r.phase, base, atol=1e-12):
            raise GridMismatch("runs are on different phase grids")
    xs = np.stack([r.x for r in runs])
    ys = np.stack([r.y for r in runs])
    return AveragedPath(
        phase=base,
        mean_x=xs.mean(axis=0),
        mean_y=ys.mean(axis=0),
        sd_x=xs.std(axis=0),
        sd_y=ys.std(axis=0),
    )
