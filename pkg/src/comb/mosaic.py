"""Tile registration and mosaic composition for comb scans.

Registration is translation-only: the stage constrains motion to XY, so
each adjacent tile pair is aligned by maximizing normalized cross
correlation over integer shifts near the nominal grid offset. Global
placement anchors tile (0, 0) and accumulates refined offsets along a
row-major spanning tree; residuals on the remaining adjacencies expose
accumulated drift. Overlaps are blended with separable linear feathering.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CombError
from .scanplan import ScanPlan

MIN_OVERLAP_PX = 16
DEFAULT_CONFIDENCE_THRESHOLD = 0.5


class MissingTile(CombError):
    pass


class InsufficientOverlap(CombError):
    pass


@dataclass
class Tile:
    image: np.ndarray
    grid_pos: tuple[int, int]  # (row, col)

    def __post_init__(self):
        self.image = np.asarray(self.image)
        if self.image.ndim != 2:
            raise ValueError("tiles must be single-channel rasters")


@dataclass(frozen=True)
class RegistrationResult:
    dx: int
    dy: int
    confidence: float
    fallback: bool  # True when the nominal offset was kept (low confidence)


@dataclass(frozen=True)
class AdjacencyResidual:
    a: tuple[int, int]
    b: tuple[int, int]
    residual: tuple[int, int]  # refined offset minus placement difference
    confidence: float
    fallback: bool


@dataclass
class Mosaic:
    canvas: np.ndarray
    placements: dict = field(default_factory=dict)  # (row, col) -> (x_px, y_px)
    residuals: list[AdjacencyResidual] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def placements_json(self, path=None) -> str:
        payload = {
            "placements": {f"{r},{c}": list(p) for (r, c), p in self.placements.items()},
            "residuals": [
                {
                    "a": list(res.a),
                    "b": list(res.b),
                    "residual_px": list(res.residual),
                    "confidence": res.confidence,
                    "fallback": res.fallback,
                }
                for res in self.residuals
            ],
            "flags": self.flags,
        }
        text = json.dumps(payload, indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text


def _overlap_views(a: np.ndarray, b: np.ndarray, dx: int, dy: int):
    """Views of a and b over their overlap when b sits at (dx, dy) relative to a."""
    ha, wa = a.shape
    hb, wb = b.shape
    ax0, ax1 = max(0, dx), min(wa, dx + wb)
    ay0, ay1 = max(0, dy), min(ha, dy + hb)
    if ax1 - ax0 <= 0 or ay1 - ay0 <= 0:
        return None, None
    bx0, by0 = ax0 - dx, ay0 - dy
    va = a[ay0:ay1, ax0:ax1]
    vb = b[by0 : by0 + (ay1 - ay0), bx0 : bx0 + (ax1 - ax0)]
    return va, vb


def _center_crop(a: np.ndarray, b: np.ndarray, size: int):
    h, w = a.shape
    if h <= size and w <= size:
        return a, b
    y0 = max((h - size) // 2, 0)
    x0 = max((w - size) // 2, 0)
    y1 = min(y0 + size, h)
    x1 = min(x0 + size, w)
    return a[y0:y1, x0:x1], b[y0:y1, x0:x1]


def _ncc(a: np.ndarray, b: np.ndarray) -> float:
    fa = a.astype(float).ravel()
    fb = b.astype(float).ravel()
    fa -= fa.mean()
    fb -= fb.mean()
    denom = np.sqrt(np.dot(fa, fa) * np.dot(fb, fb))
    if denom == 0.0:
        return 0.0
    return float(np.dot(fa, fb) / denom)


def register_pair(
    a: Tile | np.ndarray,
    b: Tile | np.ndarray,
    nominal: tuple[int, int],
    search_radius: int = 5,
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD,
    score_window: int = 160,
) -> RegistrationResult:
    """Refine b's offset relative to a by exhaustive NCC over integer shifts.

    The correlation is scored on a centered window of the overlap (bounded
    by ``score_window``) to keep the exhaustive search cheap. Peaks below
    the confidence threshold fall back to the nominal offset, flagged.
    """
    ia = a.image if isinstance(a, Tile) else np.asarray(a)
    ib = b.image if isinstance(b, Tile) else np.asarray(b)
    ndx, ndy = int(round(nominal[0])), int(round(nominal[1]))

    va, vb = _overlap_views(ia, ib, ndx, ndy)
    if va is None or va.shape[0] < MIN_OVERLAP_PX or va.shape[1] < MIN_OVERLAP_PX:
        raise InsufficientOverlap(
            f"nominal offset ({ndx}, {ndy}) leaves less than "
            f"{MIN_OVERLAP_PX}x{MIN_OVERLAP_PX} px of overlap"
        )

    best = (-2.0, ndx, ndy)
    for dy in range(ndy - search_radius, ndy + search_radius + 1):
        for dx in range(ndx - search_radius, ndx + search_radius + 1):
            va, vb = _overlap_views(ia, ib, dx, dy)
            if va is None or va.shape[0] < MIN_OVERLAP_PX or va.shape[1] < MIN_OVERLAP_PX:
                continue
            score = _ncc(*_center_crop(va, vb, score_window))
            if score > best[0]:
                best = (score, dx, dy)

    score, dx, dy = best
    if score < confidence_threshold:
        return RegistrationResult(ndx, ndy, max(score, 0.0), fallback=True)
    return RegistrationResult(dx, dy, score, fallback=False)


def _feather_weights(h: int, w: int, feather: int) -> np.ndarray:
    """Separable linear ramp weights, never zero so coverage stays defined."""
    wy = np.minimum(np.arange(h) + 1.0, np.arange(h)[::-1] + 1.0)
    wx = np.minimum(np.arange(w) + 1.0, np.arange(w)[::-1] + 1.0)
    return np.minimum(wy, feather)[:, None] * np.minimum(wx, feather)[None, :]


def nominal_offsets(plan: ScanPlan, px_per_mm: float) -> tuple[int, int]:
    """Pixel pitch between adjacent columns and rows per plan geometry."""
    return (
        int(round(plan.pitch_x * px_per_mm)),
        int(round(plan.pitch_y * px_per_mm)),
    )


def compose(
    tiles: list[Tile],
    plan: ScanPlan,
    px_per_mm: float,
    search_radius: int = 5,
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD,
    feather: int = 64,
) -> Mosaic:
    """Register all adjacent pairs and composite the tiles into one canvas."""
    by_grid = {t.grid_pos: t for t in tiles}
    for r in range(plan.rows):
        for c in range(plan.cols):
            if (r, c) not in by_grid:
                raise MissingTile(f"plan expects a tile at row {r}, col {c}")
    shape = next(iter(by_grid.values())).image.shape
    for t in by_grid.values():
        if t.image.shape != shape:
            raise ValueError("all tiles must share the same dimensions")

    pitch_x_px, pitch_y_px = nominal_offsets(plan, px_per_mm)
    flags: list[str] = []
    # Pairwise registrations: key (grid_a, grid_b) -> result, with b right of
    # or below a.
    reg: dict[tuple, RegistrationResult] = {}
    for r in range(plan.rows):
        for c in range(plan.cols):
            if c + 1 < plan.cols:
                res = register_pair(
                    by_grid[(r, c)], by_grid[(r, c + 1)], (pitch_x_px, 0),
                    search_radius, confidence_threshold,
                )
                reg[((r, c), (r, c + 1))] = res
                if res.fallback:
                    flags.append(f"low confidence at ({r},{c})-({r},{c + 1})")
            if r + 1 < plan.rows:
                res = register_pair(
                    by_grid[(r, c)], by_grid[(r + 1, c)], (0, pitch_y_px),
                    search_radius, confidence_threshold,
                )
                reg[((r, c), (r + 1, c))] = res
                if res.fallback:
                    flags.append(f"low confidence at ({r},{c})-({r + 1},{c})")

    # Row-major spanning tree: (0,0) anchored, first column chains downward,
    # rows chain rightward.
    placements: dict[tuple[int, int], tuple[int, int]] = {(0, 0): (0, 0)}
    for r in range(1, plan.rows):
        res = reg[((r - 1, 0), (r, 0))]
        px, py = placements[(r - 1, 0)]
        placements[(r, 0)] = (px + res.dx, py + res.dy)
    for r in range(plan.rows):
        for c in range(1, plan.cols):
            res = reg[((r, c - 1), (r, c))]
            px, py = placements[(r, c - 1)]
            placements[(r, c)] = (px + res.dx, py + res.dy)

    residuals = [
        AdjacencyResidual(
            a=ga,
            b=gb,
            residual=(
                res.dx - (placements[gb][0] - placements[ga][0]),
                res.dy - (placements[gb][1] - placements[ga][1]),
            ),
            confidence=res.confidence,
            fallback=res.fallback,
        )
        for (ga, gb), res in reg.items()
    ]

    th, tw = shape
    xs = [p[0] for p in placements.values()]
    ys = [p[1] for p in placements.values()]
    x_shift, y_shift = -min(xs), -min(ys)
    canvas_w = max(xs) + x_shift + tw
    canvas_h = max(ys) + y_shift + th

    acc = np.zeros((canvas_h, canvas_w))
    wsum = np.zeros((canvas_h, canvas_w))
    weights = _feather_weights(th, tw, feather)
    for grid, (px, py) in placements.items():
        x0, y0 = px + x_shift, py + y_shift
        img = by_grid[grid].image.astype(float)
        acc[y0 : y0 + th, x0 : x0 + tw] += img * weights
        wsum[y0 : y0 + th, x0 : x0 + tw] += weights
    canvas = np.where(wsum > 0, acc / np.where(wsum == 0, 1.0, wsum), 0.0)
    canvas = np.clip(np.rint(canvas), 0, 255).astype(np.uint8)

    placements = {g: (p[0] + x_shift, p[1] + y_shift) for g, p in placements.items()}
    return Mosaic(canvas=canvas, placements=placements, residuals=residuals, flags=flags)


def load_tiles(directory, plan: ScanPlan) -> list[Tile]:
    """Numbered image files in acquisition order, mapped to grid positions."""
    from PIL import Image

    paths = sorted(p for p in Path(directory).iterdir() if p.is_file())
    grid = plan.grid_indices
    if len(paths) != len(grid):
        raise MissingTile(f"plan expects {len(grid)} tiles, found {len(paths)}")
    tiles = []
    for p, gp in zip(paths, grid):
        with Image.open(p) as img:
            tiles.append(Tile(image=np.asarray(img.convert("L")), grid_pos=gp))
    return tiles


def save_canvas(canvas: np.ndarray, path) -> None:
    from PIL import Image

    Image.fromarray(canvas, mode="L").save(path)
