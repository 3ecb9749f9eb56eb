import math

import numpy as np
import pytest

from comb.metrics import (
    AveragedPath,
    CalibrationSpec,
    DegenerateTangent,
    GridMismatch,
    NormalizedRun,
    TooFewSamples,
    TrackedRun,
    average_runs,
    calibrate,
    decompose_errors,
    normalize_cycle,
    resample_path,
    split_cycles,
)


def straight_commanded(n=500, length=100.0):
    phase = np.arange(n) / n
    return NormalizedRun(phase=phase, x=np.zeros(n), y=length * phase)


# -- calibrate ---------------------------------------------------------------


def test_calibrate_examples():
    run = TrackedRun(t=[0, 1], x=[54.8, 0.0], y=[0.0, 54.8])
    out = calibrate(run, CalibrationSpec(px_per_mm=5.48))
    assert out.x[0] == pytest.approx(10.0, abs=1e-12)
    assert out.x[1] == 0.0
    assert out.unit == "mm"

    identity = calibrate(run, CalibrationSpec(px_per_mm=1.0))
    np.testing.assert_allclose(identity.x, run.x)


def test_calibration_scaling_property():
    # multiplying px_per_mm by k scales every mm metric by 1/k when both the
    # measured track and the commanded path pass through the calibration
    rng = np.random.default_rng(11)
    t = np.arange(50) * 0.1
    cmd_u = np.zeros(50)
    cmd_v = np.linspace(0, 500, 50)
    u = cmd_u + rng.normal(0, 10, 50)
    v = cmd_v + rng.normal(0, 10, 50)
    k = 2.5
    n = 64
    reports = []
    for ppm in (5.48, 5.48 * k):
        cal = CalibrationSpec(ppm)
        cmd = normalize_cycle(calibrate(TrackedRun(t=t, x=cmd_u, y=cmd_v), cal), n)
        norm = normalize_cycle(calibrate(TrackedRun(t=t, x=u, y=v), cal), n)
        reports.append(decompose_errors(norm, cmd))
    assert reports[1].cte_rms * k == pytest.approx(reports[0].cte_rms, rel=1e-9)
    assert reports[1].euclid_rms * k == pytest.approx(reports[0].euclid_rms, rel=1e-9)


# -- normalize_cycle ----------------------------------------------------------


def test_normalize_identity_for_uniform_run():
    n = 100
    t = np.arange(n) * 0.02  # uniform over [0, 2), one cycle of duration 2
    x = np.sin(t)
    y = np.cos(t)
    run = TrackedRun(t=t, x=x, y=y, unit="mm")
    norm = normalize_cycle(run, n_samples=n, t_start=0.0, t_end=2.0)
    np.testing.assert_allclose(norm.x, x, atol=1e-12)
    np.testing.assert_allclose(norm.y, y, atol=1e-12)


def test_normalize_constant_run_stays_constant():
    run = TrackedRun(t=[0, 1, 2], x=[3, 3, 3], y=[4, 4, 4], unit="mm")
    norm = normalize_cycle(run, 50)
    assert np.all(norm.x == 3) and np.all(norm.y == 4)


def test_normalize_matches_independent_interpolation():
    # run sampled at 2x rate; decimating through the normalizer must agree
    # with direct linear interpolation at the chosen phases
    rng = np.random.default_rng(5)
    t = np.linspace(0, 3, 121)
    x = rng.normal(0, 1, 121).cumsum()
    y = rng.normal(0, 1, 121).cumsum()
    run = TrackedRun(t=t, x=x, y=y, unit="mm")
    n = 60
    norm = normalize_cycle(run, n, t_start=0.0, t_end=3.0)
    phases = np.arange(n) / n
    expect_x = np.interp(phases * 3.0, t, x)
    assert np.max(np.abs(norm.x - expect_x)) < 1e-12


def test_normalize_too_few_samples():
    with pytest.raises(TooFewSamples):
        TrackedRun(t=[0.0], x=[1.0], y=[1.0])
    run = TrackedRun(t=[0, 1], x=[0, 1], y=[0, 1])
    with pytest.raises(TooFewSamples):
        normalize_cycle(run, n_samples=1)


def test_split_cycles_shares_boundaries():
    t = np.linspace(0, 4, 401)
    run = TrackedRun(t=t, x=t, y=t, unit="mm")
    cycles = split_cycles(run, [0.0, 2.0, 4.0])
    assert len(cycles) == 2
    assert cycles[0].t[-1] == pytest.approx(2.0)
    assert cycles[1].t[0] == pytest.approx(2.0)


# -- decompose_errors ---------------------------------------------------------


def test_perfect_tracking_gives_zero_errors():
    cmd = straight_commanded()
    report = decompose_errors(NormalizedRun(cmd.phase, cmd.x.copy(), cmd.y.copy()), cmd)
    assert report.cte_rms == 0 and report.ate_rms == 0 and report.euclid_rms == 0


def test_pure_lateral_offset_is_cross_track():
    cmd = straight_commanded()
    measured = NormalizedRun(cmd.phase, cmd.x + 2.0, cmd.y.copy())
    report = decompose_errors(measured, cmd)
    assert report.cte_rms == pytest.approx(2.0, abs=1e-9)
    assert report.ate_rms == pytest.approx(0.0, abs=1e-9)
    assert report.euclid_rms == pytest.approx(2.0, abs=1e-9)
    assert report.cte_max == pytest.approx(2.0, abs=1e-9)


def test_constant_lag_is_along_track():
    # path along y at 10 mm/s, measured lags by 0.05 s -> 0.5 mm along track
    n = 500
    duration = 10.0
    speed = 10.0
    phase = np.arange(n) / n
    cmd = NormalizedRun(phase=phase, x=np.zeros(n), y=speed * duration * phase)
    lag = 0.05
    measured = NormalizedRun(phase=phase, x=np.zeros(n),
                             y=speed * (duration * phase - lag))
    report = decompose_errors(measured, cmd)
    assert report.ate_rms == pytest.approx(0.5, abs=1e-9)
    assert report.cte_rms == pytest.approx(0.0, abs=1e-9)


def test_orthogonality_identity_per_phase():
    rng = np.random.default_rng(8)
    n = 200
    phase = np.arange(n) / n
    theta = 2 * np.pi * phase
    cmd = NormalizedRun(phase=phase, x=10 * np.cos(theta), y=10 * np.sin(theta))
    measured = NormalizedRun(phase=phase,
                             x=cmd.x + rng.normal(0, 1, n),
                             y=cmd.y + rng.normal(0, 1, n))
    report = decompose_errors(measured, cmd)
    pp = report.per_phase
    dev = np.abs(pp["cte_rms"] ** 2 + pp["ate_rms"] ** 2 - pp["euclid_rms"] ** 2)
    assert np.max(dev) <= 1e-9


def test_frame_invariance_under_rotation():
    rng = np.random.default_rng(9)
    n = 128
    phase = np.arange(n) / n
    cmd_x = 5 * np.cos(2 * np.pi * phase)
    cmd_y = 8 * np.sin(2 * np.pi * phase)
    mx = cmd_x + rng.normal(0, 0.5, n)
    my = cmd_y + rng.normal(0, 0.5, n)
    base = decompose_errors(
        NormalizedRun(phase, mx, my), NormalizedRun(phase, cmd_x, cmd_y)
    )
    a = math.radians(63.0)
    rot = lambda x, y: (x * math.cos(a) - y * math.sin(a),
                        x * math.sin(a) + y * math.cos(a))
    rmx, rmy = rot(mx, my)
    rcx, rcy = rot(cmd_x, cmd_y)
    rotated = decompose_errors(
        NormalizedRun(phase, rmx, rmy), NormalizedRun(phase, rcx, rcy)
    )
    assert rotated.cte_rms == pytest.approx(base.cte_rms, abs=1e-9)
    assert rotated.ate_rms == pytest.approx(base.ate_rms, abs=1e-9)
    assert rotated.euclid_rms == pytest.approx(base.euclid_rms, abs=1e-9)


def test_report_invariants_hold():
    rng = np.random.default_rng(10)
    cmd = straight_commanded(300)
    runs = [NormalizedRun(cmd.phase, cmd.x + rng.normal(0, 1.2, 300),
                          cmd.y + rng.normal(0, 0.7, 300)) for _ in range(5)]
    report = decompose_errors(runs, cmd)
    assert report.cte_max >= report.cte_rms >= 0
    assert report.euclid_rms ** 2 >= max(report.cte_rms, report.ate_rms) ** 2 - 1e-9
    assert report.n_runs == 5


def test_stationary_phases_excluded_and_reported():
    n = 100
    phase = np.arange(n) / n
    x = np.concatenate([np.linspace(0, 10, 50), np.full(50, 10.0)])
    cmd = NormalizedRun(phase=phase, x=x, y=np.zeros(n))
    measured = NormalizedRun(phase=phase, x=x + 1.0, y=np.zeros(n))
    report = decompose_errors(measured, cmd)
    assert len(report.excluded_phases) > 0
    assert report.n_phases + len(report.excluded_phases) == n


def test_fully_stationary_path_raises():
    n = 32
    phase = np.arange(n) / n
    cmd = NormalizedRun(phase=phase, x=np.zeros(n), y=np.zeros(n))
    with pytest.raises(DegenerateTangent):
        decompose_errors(NormalizedRun(phase, np.ones(n), np.zeros(n)), cmd)


def test_grid_mismatch_rejected():
    cmd = straight_commanded(100)
    other = straight_commanded(101)
    with pytest.raises(GridMismatch):
        decompose_errors(other, cmd)


def test_projection_mode_matches_phase_mode_on_straight_path():
    cmd = straight_commanded()
    measured = NormalizedRun(cmd.phase, cmd.x + 1.5, cmd.y.copy())
    by_phase = decompose_errors(measured, cmd, cte_mode="phase")
    by_proj = decompose_errors(measured, cmd, cte_mode="projection")
    assert by_proj.cte_rms == pytest.approx(abs(by_phase.cte_rms), abs=1e-9)


def test_determinism_same_inputs_same_report():
    rng = np.random.default_rng(12)
    cmd = straight_commanded(200)
    measured = NormalizedRun(cmd.phase, cmd.x + rng.normal(0, 1, 200), cmd.y.copy())
    r1 = decompose_errors(measured, cmd)
    r2 = decompose_errors(measured, cmd)
    assert r1.to_dict() == r2.to_dict()


# -- average_runs -------------------------------------------------------------


def test_average_single_run_is_identity():
    cmd = straight_commanded(50)
    avg = average_runs([cmd])
    np.testing.assert_array_equal(avg.mean_x, cmd.x)
    assert np.all(avg.sd_x == 0) and np.all(avg.sd_y == 0)


def test_average_symmetric_offsets():
    base = straight_commanded(50)
    plus = NormalizedRun(base.phase, base.x + 1.0, base.y.copy())
    minus = NormalizedRun(base.phase, base.x - 1.0, base.y.copy())
    avg = average_runs([plus, minus])
    np.testing.assert_allclose(avg.mean_x, base.x, atol=1e-12)
    np.testing.assert_allclose(avg.sd_x, np.ones(50), atol=1e-12)  # population sd


def test_average_identical_runs_zero_dispersion():
    base = straight_commanded(50)
    runs = [NormalizedRun(base.phase, base.x.copy(), base.y.copy()) for _ in range(5)]
    avg = average_runs(runs)
    # dispersion is zero up to the rounding of the five-way mean
    np.testing.assert_allclose(avg.sd_x, 0, atol=1e-12)
    np.testing.assert_allclose(avg.sd_y, 0, atol=1e-12)


def test_average_grid_mismatch():
    with pytest.raises(GridMismatch):
        average_runs([straight_commanded(50), straight_commanded(60)])


def test_tracked_run_csv_round_trip(tmp_path):
    run = TrackedRun(t=[0.0, 0.5, 1.0], x=[1.0, 2.0, 3.0], y=[4.0, 5.0, 6.0])
    path = tmp_path / "run.csv"
    run.to_csv(path)
    loaded = TrackedRun.from_csv(path)
    np.testing.assert_allclose(loaded.x, run.x, atol=1e-9)
