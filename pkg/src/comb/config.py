"""JSON configuration: one file with per-module sections, flags win on merge."""

from __future__ import annotations

import json
from .controller import Controller, DEFAULT_FLAPPER_HZ, DEFAULT_EXPOSURE_S, SETTLE_S
from .dance import DanceParams
from .maw import MawSpec
from .scanplan import ScanPlan
from .stage import StageConfig, StageSimulator

DEFAULT_CONFIG: dict = {
    "stage": {
        "steps_per_mm": 80.0,
        "v_max": 50.0,
        "a_max": 200.0,
        "travel_min": 0.0,
        "travel_max": 200.0,
        "tick_s": 0.001,
    },
    "maw": {
        "L": 300.0,
        "B": 200.0,
        "c": 10.0,
        "s": 5.0,
        "eps": 0.3,
        "shaft_radius": 5.0,
    },
    "dance": {
        "run_length": 20.0,
        "orientation_deg": 0.0,
        "cycles": 5,
        "run_speed": 10.0,
        "lateral_amplitude": 0.0,
        "lateral_freq": 13.0,
        "loop_radius": 10.0,
        "origin": [100.0, 100.0],
    },
    "scan": {
        "rows": 7,
        "cols": 8,
        "row_overlap": 0.604,
        "col_overlap": 0.555,
        "footprint_w": 40.0,
        "footprint_h": 30.0,
        "origin": [10.0, 10.0],
        "serpentine": True,
        # Capture budget per position: hold-still time plus image capture
        # and on-board storage. With the default stage kinematics this puts
        # the mean row-to-row transition near 10.5 s.
        "settle_s": SETTLE_S,
        "exposure_s": DEFAULT_EXPOSURE_S,
    },
    "flapper": {"hz": DEFAULT_FLAPPER_HZ},
    "service": {"host": "127.0.0.1", "port": 8750},
}


def merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    cfg = DEFAULT_CONFIG
    if path is not None:
        with open(path) as fh:
            cfg = merge(cfg, json.load(fh))
    if overrides:
        cfg = merge(cfg, overrides)
    return cfg


def stage_config(cfg: dict) -> StageConfig:
    return StageConfig.from_dict(cfg.get("stage", {}))


def dance_params(cfg: dict) -> DanceParams:
    return DanceParams.from_dict(cfg.get("dance", {}))


def scan_plan(cfg: dict) -> ScanPlan:
    section = dict(cfg.get("scan", {}))
    section.pop("settle_s", None)
    section.pop("exposure_s", None)
    if "origin" in section:
        section["origin"] = tuple(float(v) for v in section["origin"])
    return ScanPlan.from_dict(section)


def maw_spec(cfg: dict) -> MawSpec:
    return MawSpec.from_dict(cfg.get("maw", {}))


def build_controller(cfg: dict) -> Controller:
    scan = cfg.get("scan", {})
    return Controller(
        sim=StageSimulator(stage_config(cfg)),
        dance_params=dance_params(cfg),
        scan_plan=scan_plan(cfg),
        flapper_hz=float(cfg.get("flapper", {}).get("hz", DEFAULT_FLAPPER_HZ)),
        settle_s=float(scan.get("settle_s", SETTLE_S)),
        exposure_s=float(scan.get("exposure_s", DEFAULT_EXPOSURE_S)),
    )
