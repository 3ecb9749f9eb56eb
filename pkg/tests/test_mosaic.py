import numpy as np
import pytest

from comb.mosaic import (
    InsufficientOverlap,
    MissingTile,
    Mosaic,
    Tile,
    compose,
    load_tiles,
    nominal_offsets,
    register_pair,
    save_canvas,
)
from comb.scanplan import plan_grid


def cut(master, x, y, w, h):
    return master[y : y + h, x : x + w].copy()


def test_register_recovers_known_shift(texture):
    master = texture(300, 400, seed=1)
    a = cut(master, 50, 50, 200, 150)
    b = cut(master, 50 + 112, 50 - 7, 200, 150)  # true offset (112, -7)
    res = register_pair(a, b, nominal=(110, -5), search_radius=8)
    assert (res.dx, res.dy) == (112, -7)
    assert res.confidence > 0.9
    assert not res.fallback


def test_register_identity():
    rng = np.random.default_rng(2)
    a = rng.integers(0, 255, (100, 100)).astype(np.uint8)
    res = register_pair(a, a.copy(), nominal=(0, 0), search_radius=3)
    assert (res.dx, res.dy) == (0, 0)
    assert res.confidence == pytest.approx(1.0, abs=1e-9)


def test_flat_tiles_fall_back_to_nominal():
    a = np.full((100, 100), 128, dtype=np.uint8)
    res = register_pair(a, a.copy(), nominal=(40, 0), search_radius=3)
    assert res.fallback
    assert (res.dx, res.dy) == (40, 0)
    assert res.confidence == 0.0


def test_insufficient_overlap_rejected():
    a = np.zeros((50, 50), dtype=np.uint8)
    with pytest.raises(InsufficientOverlap):
        register_pair(a, a.copy(), nominal=(45, 0), search_radius=2)


def test_registration_translation_equivariance(texture):
    master = texture(300, 400, seed=3)
    a1 = cut(master, 40, 40, 180, 140)
    b1 = cut(master, 40 + 90, 40 + 5, 180, 140)
    a2 = cut(master, 60, 70, 180, 140)          # both tiles shifted identically
    b2 = cut(master, 60 + 90, 70 + 5, 180, 140)
    r1 = register_pair(a1, b1, nominal=(88, 3), search_radius=6)
    r2 = register_pair(a2, b2, nominal=(88, 3), search_radius=6)
    assert (r1.dx, r1.dy) == (r2.dx, r2.dy) == (90, 5)


def test_compose_single_tile_is_identity(texture):
    master = texture(60, 80, seed=4)
    plan = plan_grid(1, 1, footprint_w=80, footprint_h=60)
    mosaic = compose([Tile(master, (0, 0))], plan, px_per_mm=1.0)
    np.testing.assert_array_equal(mosaic.canvas, master)


def test_compose_two_tiles_reproduces_master(texture):
    # two tiles cut from one master with 55.5% overlap recompose to the master
    master = texture(200, 400, seed=5)
    tw, th = 240, 200
    plan = plan_grid(1, 2, footprint_w=tw, footprint_h=th, col_overlap=0.555)
    dx, _ = nominal_offsets(plan, px_per_mm=1.0)
    tiles = [
        Tile(cut(master, 0, 0, tw, th), (0, 0)),
        Tile(cut(master, dx, 0, tw, th), (0, 1)),
    ]
    mosaic = compose(tiles, plan, px_per_mm=1.0)
    region = master[:, : tw + dx]
    assert mosaic.canvas.shape == region.shape
    diff = np.abs(mosaic.canvas.astype(float) - region.astype(float))
    assert diff.mean() <= 2.0


def test_compose_grid_round_trip_with_jitter(texture):
    """Tiles cut at jittered offsets; registration must recover the jitter
    and the canvas must reproduce the master where covered."""
    master = texture(500, 700, seed=6)
    tw, th = 200, 160
    plan = plan_grid(2, 3, footprint_w=tw, footprint_h=th,
                     row_overlap=0.5, col_overlap=0.5)
    dx, dy = nominal_offsets(plan, px_per_mm=1.0)
    rng = np.random.default_rng(7)
    truth = {}
    tiles = []
    for r in range(2):
        for c in range(3):
            jx = int(rng.integers(-3, 4)) if (r, c) != (0, 0) else 0
            jy = int(rng.integers(-3, 4)) if (r, c) != (0, 0) else 0
            x, y = 20 + c * dx + jx, 20 + r * dy + jy
            truth[(r, c)] = (x - 20, y - 20)
            tiles.append(Tile(cut(master, x, y, tw, th), (r, c)))
    mosaic = compose(tiles, plan, px_per_mm=1.0, search_radius=6)
    base = mosaic.placements[(0, 0)]
    for grid, (px, py) in mosaic.placements.items():
        tx, ty = truth[grid]
        assert abs((px - base[0]) - tx) <= 1
        assert abs((py - base[1]) - ty) <= 1
    for res in mosaic.residuals:
        assert abs(res.residual[0]) <= 1 and abs(res.residual[1]) <= 1


def test_canvas_size_matches_analytic_coverage(texture):
    master = texture(400, 600, seed=8)
    tw, th = 180, 150
    plan = plan_grid(2, 3, footprint_w=tw, footprint_h=th,
                     row_overlap=0.4, col_overlap=0.4)
    dx, dy = nominal_offsets(plan, px_per_mm=1.0)
    tiles = [
        Tile(cut(master, c * dx, r * dy, tw, th), (r, c))
        for r in range(2)
        for c in range(3)
    ]
    mosaic = compose(tiles, plan, px_per_mm=1.0)
    assert mosaic.canvas.shape == (th + dy, tw + 2 * dx)


def test_missing_tile_rejected(texture):
    master = texture(200, 300, seed=9)
    plan = plan_grid(1, 2, footprint_w=150, footprint_h=200, col_overlap=0.5)
    with pytest.raises(MissingTile):
        compose([Tile(cut(master, 0, 0, 150, 200), (0, 0))], plan, px_per_mm=1.0)


def test_tile_io_round_trip(tmp_path, texture):
    master = texture(120, 200, seed=10)
    tw, th = 120, 120
    plan = plan_grid(1, 2, footprint_w=tw, footprint_h=th, col_overlap=0.5)
    dx, _ = nominal_offsets(plan, px_per_mm=1.0)
    tiles_dir = tmp_path / "tiles"
    tiles_dir.mkdir()
    save_canvas(cut(master, 0, 0, tw, th), tiles_dir / "tile_000.png")
    save_canvas(cut(master, dx, 0, tw, th), tiles_dir / "tile_001.png")
    tiles = load_tiles(tiles_dir, plan)
    assert [t.grid_pos for t in tiles] == [(0, 0), (0, 1)]
    mosaic = compose(tiles, plan, px_per_mm=1.0)
    out = tmp_path / "mosaic.png"
    save_canvas(mosaic.canvas, out)
    assert out.exists()
    text = mosaic.placements_json(tmp_path / "placements.json")
    assert "0,1" in text
