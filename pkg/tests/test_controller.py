import numpy as np
import pytest

from comb.controller import (
    TRANSITIONS,
    AbortedByEndstop,
    Controller,
    Key,
    KeypadCommand,
    Mode,
    RejectedTransition,
    UnknownKey,
    parse_key,
)
from comb.dance import DanceParams, generate
from comb.scanplan import plan_grid
from comb.stage import AxisConfig, StageConfig, StageSimulator


def make_controller(**kwargs):
    ax = AxisConfig()
    sim = StageSimulator(StageConfig(x=ax, y=ax))
    defaults = dict(
        dance_params=DanceParams(cycles=1, origin=(100.0, 100.0)),
        scan_plan=plan_grid(2, 2, footprint_w=40, footprint_h=30, origin=(10, 10)),
        exposure_s=0.2,
    )
    defaults.update(kwargs)
    return Controller(sim=sim, **defaults)


def enable(c):
    assert c.dispatch(Key.TOGGLE_ENABLE).accepted


# -- dispatch ----------------------------------------------------------------


def test_mode_switch_from_idle():
    c = make_controller()
    res = c.dispatch(Key.MODE_DANCE)
    assert res.accepted and c.state.mode is Mode.DANCE


def test_jog_rejected_while_motion_disabled():
    c = make_controller()
    c.dispatch(Key.MODE_JOG)
    res = c.dispatch(Key.JOG_X_PLUS)
    assert not res.accepted
    assert "disabled" in res.reason


def test_start_in_dance_mode_begins_routine():
    c = make_controller()
    enable(c)
    c.dispatch(Key.MODE_DANCE)
    res = c.dispatch(Key.START)
    assert res.accepted
    assert c.state.active_routine == "dance-1"


def test_jog_moves_one_step():
    c = make_controller()
    enable(c)
    c.dispatch(Key.MODE_JOG)
    assert c.dispatch(Key.JOG_X_PLUS).accepted
    while c.sim.busy:
        c.tick()
    assert c.sim.pose().x == pytest.approx(1.0)
    # repeated presses accumulate even before the move finishes
    c.dispatch(Key.JOG_Y_PLUS)
    c.dispatch(Key.JOG_Y_PLUS)
    while c.sim.busy:
        c.tick()
    assert c.sim.pose().y == pytest.approx(2.0)


def test_unknown_key_raises():
    with pytest.raises(UnknownKey):
        parse_key("Q")
    c = make_controller()
    with pytest.raises(UnknownKey):
        c.dispatch("9")


def test_key_symbols_parse():
    assert parse_key("#") is Key.START
    assert parse_key("*") is Key.STOP
    assert parse_key("0") is Key.TOGGLE_ENABLE
    assert parse_key("up") is Key.JOG_Y_PLUS
    assert parse_key("3") is Key.MODE_DANCE


def test_stop_is_always_accepted_and_disables():
    c = make_controller()
    enable(c)
    c.dispatch(Key.MODE_DANCE)
    c.dispatch(Key.START)
    res = c.dispatch(Key.STOP)
    assert res.accepted
    assert c.state.active_routine is None
    assert not c.state.motion_enabled


def test_flap_mode_flapper_control():
    c = make_controller()
    c.dispatch(Key.MODE_FLAP)
    res = c.dispatch(Key.START)
    assert res.accepted and c.state.flapper_hz == 13.0
    # leaving FLAP mode forces the flapper off
    c.dispatch(Key.MODE_IDLE)
    assert c.state.flapper_hz == 0.0


def test_mode_locked_during_routine():
    c = make_controller()
    enable(c)
    c.dispatch(Key.MODE_DANCE)
    c.dispatch(Key.START)
    assert not c.dispatch(Key.MODE_IDLE).accepted
    assert not c.dispatch(Key.TOGGLE_ENABLE).accepted
    assert c.state.mode is Mode.DANCE


def test_transition_table_is_total():
    assert set(TRANSITIONS) == {(m, k) for m in Mode for k in Key}


def expected_outcome(mode, key, motion_enabled):
    """Independent statement of the committed keymap rules."""
    mode_keys = {Key.MODE_IDLE, Key.MODE_JOG, Key.MODE_DANCE, Key.MODE_SCAN, Key.MODE_FLAP}
    jog_keys = {Key.JOG_X_PLUS, Key.JOG_X_MINUS, Key.JOG_Y_PLUS, Key.JOG_Y_MINUS}
    if key in mode_keys:
        return True
    if key in jog_keys:
        return mode is Mode.JOG and motion_enabled
    if key is Key.START:
        if mode is Mode.FLAP:
            return True
        return mode in (Mode.DANCE, Mode.SCAN) and motion_enabled
    if key is Key.STOP:
        return True
    if key is Key.TOGGLE_ENABLE:
        return True
    raise AssertionError(key)


@pytest.mark.parametrize("motion_enabled", [False, True])
def test_exhaustive_mode_key_enumeration(motion_enabled):
    """Every (mode, key) pair yields accept or reject exactly as documented."""
    for mode in Mode:
        for key in Key:
            c = make_controller()
            if motion_enabled:
                enable(c)
            # steer into the wanted mode (always legal while idle)
            c.dispatch({Mode.IDLE: Key.MODE_IDLE, Mode.JOG: Key.MODE_JOG,
                        Mode.DANCE: Key.MODE_DANCE, Mode.SCAN: Key.MODE_SCAN,
                        Mode.FLAP: Key.MODE_FLAP}[mode])
            assert c.state.mode is mode
            before = c.state
            res = c.dispatch(KeypadCommand(key, t=c.sim.t))
            want = expected_outcome(mode, key, motion_enabled)
            assert res.accepted == want, (mode, key, motion_enabled)
            if not res.accepted:
                assert res.state == before  # rejected commands leave state unchanged
                assert res.reason


# -- run_routine --------------------------------------------------------------


def test_dance_routine_flapper_inside_run_spans():
    c = make_controller()
    enable(c)
    c.dispatch(Key.MODE_DANCE)
    plan = generate(c.dance_params)
    log = c.run_routine(plan)
    ons = log.events("flapper_on")
    offs = log.events("flapper_off")
    assert len(ons) == len(offs) == c.dance_params.cycles
    start = log.records[0]["t_s"]
    playback_t0 = ons[0]["t_s"]  # flapper starts with the first waggle run
    for on, off, (a, b) in zip(ons, offs, plan.run_spans):
        local_on = on["t_s"] - playback_t0
        local_off = off["t_s"] - playback_t0
        assert a - 0.002 <= local_on <= a + 0.002
        assert b - 0.002 <= local_off <= b + 0.002
    # no payload event outside the routine window
    t_first = log.records[0]["t_s"]
    t_last = log.records[-1]["t_s"]
    for ev in log.events():
        assert t_first <= ev["t_s"] <= t_last


def test_scan_routine_captures_settled():
    c = make_controller()
    enable(c)
    c.dispatch(Key.MODE_SCAN)
    log = c.run_routine(c.scan_plan)
    captures = log.events("capture")
    assert len(captures) == 4  # one per grid position
    poses = log.poses()
    for cap in captures:
        t = cap["t_s"]
        window = poses[(poses[:, 0] >= t - 0.1 + 1e-9) & (poses[:, 0] <= t + 1e-9)]
        assert len(window) >= 99  # at least ~100 ms of samples
        assert np.all(window[:, 1] == window[0, 1])
        assert np.all(window[:, 2] == window[0, 2])


def test_scan_capture_positions_follow_plan():
    c = make_controller()
    enable(c)
    c.dispatch(Key.MODE_SCAN)
    log = c.run_routine(c.scan_plan)
    captured = [(cap["x_mm"], cap["y_mm"]) for cap in log.events("capture")]
    for got, want in zip(captured, c.scan_plan.positions):
        assert got[0] == pytest.approx(want[0], abs=1 / 80)
        assert got[1] == pytest.approx(want[1], abs=1 / 80)


def test_routine_crossing_limit_aborts_with_partial_log():
    c = make_controller()
    enable(c)
    c.dispatch(Key.MODE_DANCE)
    plan = generate(DanceParams(cycles=1, origin=(195.0, 100.0)))  # loop exits travel
    with pytest.raises(AbortedByEndstop) as exc:
        c.run_routine(plan)
    log = exc.value.log
    assert log.aborted
    assert log.events("endstop")
    assert log.events("aborted")
    assert c.state.active_routine is None


def test_run_routine_requires_permissive_state():
    c = make_controller()
    with pytest.raises(RejectedTransition):
        c.run_routine(generate(c.dance_params))  # motion disabled, wrong mode


def test_log_timestamps_monotone_and_jsonl(tmp_path):
    c = make_controller()
    enable(c)
    c.dispatch(Key.MODE_SCAN)
    log = c.run_routine(c.scan_plan)
    ts = [r["t_s"] for r in log.records]
    assert all(b >= a for a, b in zip(ts, ts[1:]))
    path = tmp_path / "log.jsonl"
    log.to_jsonl(path)
    import json

    lines = path.read_text().splitlines()
    assert len(lines) == len(log.records)
    assert json.loads(lines[0])["kind"] in ("pose", "capture")


def test_routine_determinism():
    logs = []
    for _ in range(2):
        c = make_controller()
        enable(c)
        c.dispatch(Key.MODE_DANCE)
        logs.append(c.run_routine(generate(c.dance_params)))
    assert logs[0].records == logs[1].records
