import numpy as np
import pytest

from comb.scanplan import (
    InvalidScanParams,
    ScanPlan,
    estimate_timing,
    plan_for_area,
    plan_grid,
)
from comb.stage import AxisConfig, OutOfTravel


def interval_union_length(intervals):
    """Independent oracle: total length covered by a set of 1D intervals."""
    merged = []
    for a, b in sorted(intervals):
        if merged and a <= merged[-1][1] + 1e-12:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return sum(b - a for a, b in merged), merged


def test_coverage_factors_closed_form():
    plan = plan_grid(7, 8, footprint_w=40, footprint_h=30,
                     row_overlap=0.604, col_overlap=0.555)
    assert plan.covered_h / plan.footprint_h == pytest.approx(3.376, abs=1e-9)
    assert plan.covered_w / plan.footprint_w == pytest.approx(4.115, abs=1e-9)
    assert len(plan.positions) == 56


def test_coverage_matches_interval_union_oracle():
    plan = plan_grid(7, 8, footprint_w=40, footprint_h=30,
                     row_overlap=0.604, col_overlap=0.555)
    xs = sorted({p[0] for p in plan.positions})
    ys = sorted({p[1] for p in plan.positions})
    w_union, w_merged = interval_union_length([(x, x + plan.footprint_w) for x in xs])
    h_union, h_merged = interval_union_length([(y, y + plan.footprint_h) for y in ys])
    assert w_union == pytest.approx(plan.covered_w, abs=1e-9)
    assert h_union == pytest.approx(plan.covered_h, abs=1e-9)
    # no gaps: the union merges to a single interval per axis
    assert len(w_merged) == 1 and len(h_merged) == 1


def test_single_tile_coverage():
    plan = plan_grid(1, 1, footprint_w=40, footprint_h=30)
    assert plan.covered_w == 40 and plan.covered_h == 30
    assert plan.positions == [(0.0, 0.0)]


def test_adjacent_tiles_share_pitch_derived_overlap():
    plan = plan_grid(3, 4, footprint_w=40, footprint_h=30,
                     row_overlap=0.6, col_overlap=0.5)
    assert plan.pitch_x == pytest.approx(20.0, abs=1e-9)
    assert plan.pitch_y == pytest.approx(12.0, abs=1e-9)
    overlap_x = plan.footprint_w - plan.pitch_x
    assert overlap_x / plan.footprint_w == pytest.approx(0.5, abs=1e-9)


def test_serpentine_ordering_and_travel():
    plan = plan_grid(3, 3, footprint_w=10, footprint_h=10,
                     row_overlap=0.0, col_overlap=0.0)
    raster = plan_grid(3, 3, footprint_w=10, footprint_h=10,
                       row_overlap=0.0, col_overlap=0.0, serpentine=False)
    assert plan.grid_indices[:6] == [(0, 0), (0, 1), (0, 2), (1, 2), (1, 1), (1, 0)]
    assert plan.total_travel() < raster.total_travel()


def test_overlap_validation():
    with pytest.raises(InvalidScanParams):
        plan_grid(2, 2, row_overlap=1.0)
    with pytest.raises(InvalidScanParams):
        plan_grid(0, 2)


# -- plan_for_area ---------------------------------------------------------


def brute_force_min_rows(span, footprint, min_overlap):
    for n in range(1, 11):
        if footprint * (1 + (n - 1) * (1 - min_overlap)) >= span - 1e-12:
            return n
    raise AssertionError("no count found")


def test_area_equal_to_footprint():
    plan = plan_for_area(40, 30, footprint_w=40, footprint_h=30, min_overlap=0.5)
    assert plan.rows == 1 and plan.cols == 1
    assert not plan.flags


def test_area_twice_footprint_with_half_overlap():
    plan = plan_for_area(40, 60, footprint_w=40, footprint_h=30, min_overlap=0.5)
    assert plan.rows == brute_force_min_rows(60, 30, 0.5) == 3
    assert plan.row_overlap == pytest.approx(0.5, abs=1e-12)
    assert plan.covered_h == pytest.approx(60, abs=1e-9)


def test_area_three_footprints_zero_overlap():
    plan = plan_for_area(40, 90, footprint_w=40, footprint_h=30, min_overlap=0.0)
    assert plan.rows == brute_force_min_rows(90, 30, 0.0) == 3
    assert plan.row_overlap == pytest.approx(0.0, abs=1e-12)


def test_footprint_larger_than_area_flagged():
    plan = plan_for_area(20, 10, footprint_w=40, footprint_h=30)
    assert plan.rows == 1 and plan.cols == 1
    assert "FootprintTooLarge" in plan.flags


def test_achieved_overlap_never_below_minimum():
    rng = np.random.default_rng(3)
    for _ in range(50):
        fw = rng.uniform(5, 50)
        area = fw * rng.uniform(1.0, 6.0)
        min_ov = rng.uniform(0, 0.8)
        plan = plan_for_area(area, area, footprint_w=fw, footprint_h=fw,
                             min_overlap=min_ov)
        if plan.cols > 1:
            assert plan.col_overlap >= min_ov - 1e-9
        assert plan.covered_w >= area - 1e-9


# -- estimate_timing ---------------------------------------------------------


def test_zero_distance_transition_is_budget_only():
    plan = plan_grid(1, 2, footprint_w=40, footprint_h=30, col_overlap=1 - 1e-12)
    timing = estimate_timing(plan, AxisConfig(), settle_s=0.1, exposure_s=10.0)
    assert timing.transitions[0].move_s == pytest.approx(0.0, abs=1e-6)
    assert timing.transitions[0].total_s == pytest.approx(10.1, abs=1e-6)


def test_transition_uses_trapezoid_closed_form():
    # 20 mm pitch at v=50, a=200: 12.5 mm accel distance -> trapezoid
    plan = plan_grid(1, 2, footprint_w=40, footprint_h=30, col_overlap=0.5)
    cfg = AxisConfig(v_max=50, a_max=200)
    timing = estimate_timing(plan, cfg, settle_s=0.1, exposure_s=1.0)
    expected_move = 2 * 50 / 200 + (20 - 12.5) / 50
    assert timing.transitions[0].move_s == pytest.approx(expected_move, abs=1e-12)
    assert timing.total_s == pytest.approx(1.0 + expected_move + 0.1 + 1.0, abs=1e-9)


def test_default_budget_hits_committed_row_transition():
    plan = plan_grid(7, 8, footprint_w=40, footprint_h=30,
                     row_overlap=0.604, col_overlap=0.555, origin=(10, 10))
    timing = estimate_timing(plan, AxisConfig(), settle_s=0.1, exposure_s=10.0)
    assert 10.0 <= timing.mean_row_transition_s <= 11.0
    rows_changed = [t for t in timing.transitions if t.row_change]
    assert len(rows_changed) == 6


def test_timing_out_of_travel():
    plan = plan_grid(7, 8, footprint_w=40, footprint_h=30, origin=(150, 150))
    with pytest.raises(OutOfTravel):
        estimate_timing(plan, AxisConfig())


def test_plan_json_round_trip(tmp_path):
    plan = plan_grid(7, 8, origin=(10, 10))
    path = tmp_path / "plan.json"
    plan.to_json(path)
    clone = ScanPlan.from_json(path)
    assert clone == plan
