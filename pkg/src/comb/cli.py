"""Batch command-line entry point.

Machine-readable summary JSON goes to stdout; human-oriented notes go to
stderr. Exit codes: 0 success, 1 computation error (summary names the
error), 2 usage error. Flags win over the config file. Synthetic outputs
are fully determined by the manifest (config + flags + seed), so repeated
runs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, config as cfgmod
from .errors import CombError
from . import dance as dancemod
from . import metrics as metricsmod
from . import mosaic as mosaicmod
from . import scanplan as scanmod
from . import spectrum as spectrummod
from .stage import StageSimulator


def _emit(summary: dict) -> None:
    print(json.dumps(summary, indent=2, sort_keys=True))


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _outdir(args) -> Path:
    out = Path(getattr(args, "out_dir", None) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_maw(args) -> dict:
    cfg = cfgmod.load_config(args.check or args.config)
    spec = cfgmod.maw_spec(cfg)
    spec.check_exact()
    _note(f"aperture radius {spec.aperture} mm, insert inner radius {spec.disc_inner} mm")
    return {"command": "maw", "valid": True, "warnings": spec.warnings(), **spec.to_dict()}


def cmd_dance(args) -> dict:
    cfg = cfgmod.load_config(args.config)
    overrides = {}
    if args.params:
        overrides = json.loads(Path(args.params).read_text())
    params = dancemod.DanceParams.from_dict({**cfg["dance"], **overrides})
    plan = dancemod.generate(params)
    out = Path(args.out) if args.out else _outdir(args) / "plan.csv"
    plan.to_csv(out)
    json_path = Path(args.json) if args.json else out.with_suffix(".json")
    plan.to_json(json_path)
    _note(f"wrote {out} and {json_path}")
    return {
        "command": "dance",
        "waypoints": len(plan),
        "cycles": params.cycles,
        "duration_s": plan.duration,
        "arc_length_mm": plan.arc_length(),
        "plan_csv": str(out),
        "plan_json": str(json_path),
    }


def cmd_scan_plan(args) -> dict:
    cfg = cfgmod.load_config(args.config)
    section = dict(cfg["scan"])
    for name in ("rows", "cols", "row_overlap", "col_overlap",
                 "footprint_w", "footprint_h"):
        value = getattr(args, name)
        if value is not None:
            section[name] = value
    if args.origin:
        section["origin"] = [float(v) for v in args.origin.split(",")]
    plan = cfgmod.scan_plan({"scan": section})
    timing = scanmod.estimate_timing(
        plan,
        cfgmod.stage_config(cfg).x,
        settle_s=float(section.get("settle_s", 0.1)),
        exposure_s=float(section.get("exposure_s", 10.0)),
        cfg_y=cfgmod.stage_config(cfg).y,
    )
    out = Path(args.out) if args.out else _outdir(args) / "scan_plan.json"
    plan.to_json(out)
    _note(
        f"{plan.rows}x{plan.cols} grid, coverage {plan.covered_w:.1f}x{plan.covered_h:.1f} mm, "
        f"mean row transition {timing.mean_row_transition_s:.2f} s"
    )
    return {
        "command": "scan plan",
        "plan_json": str(out),
        **plan.to_dict()["derived"],
        "timing": timing.to_dict(),
    }


def cmd_simulate(args) -> dict:
    cfg = cfgmod.load_config(args.config)
    plan_path = Path(args.plan)
    if plan_path.suffix == ".json":
        plan = dancemod.TrajectoryPlan.from_json(plan_path)
    else:
        plan = dancemod.TrajectoryPlan.from_csv(plan_path)
    sim = StageSimulator(cfgmod.stage_config(cfg), start=(plan.x[0], plan.y[0]))
    log = sim.follow(plan)
    out = Path(args.out) if args.out else _outdir(args) / "pose_log.csv"
    log.to_csv(out)
    _note(f"executed {len(plan)} waypoints in {log.t[-1]:.3f} s of simulated time")
    return {
        "command": "simulate",
        "pose_log": str(out),
        "samples": len(log),
        "duration_s": float(log.t[-1]),
        "aborted": log.aborted,
        "infeasible_segments": len(log.warnings),
        "playback_start_t_s": log.playback_start_t,
    }


def cmd_metrics(args) -> dict:
    if not args.runs:
        raise CombError("at least one run CSV is required")
    plan_path = Path(args.plan)
    if plan_path.suffix == ".json":
        plan = dancemod.TrajectoryPlan.from_json(plan_path)
    else:
        plan = dancemod.TrajectoryPlan.from_csv(plan_path)

    cal = metricsmod.CalibrationSpec(px_per_mm=args.px_per_mm)
    n = args.n_samples
    bounds = plan.cycle_bounds() or [(float(plan.t[0]), float(plan.t[-1]))]
    t0, t1 = bounds[0]
    cycle_len = t1 - t0

    # Measured cycles grouped by commanded cycle index: the return loop
    # alternates sides, so cycle k only compares against commanded cycle k.
    groups: dict[int, list] = {k: [] for k in range(len(bounds))}
    per_run_cycles = []
    for path in args.runs:
        run = metricsmod.TrackedRun.from_csv(path)
        run = metricsmod.calibrate(run, cal)
        span = run.t[-1] - run.t[0]
        if len(bounds) > 1 and span > cycle_len * 1.5:
            cycle_times = [run.t[0] + (b[0] - bounds[0][0]) for b in bounds]
            cycle_times.append(run.t[0] + (bounds[-1][1] - bounds[0][0]))
            cycles = metricsmod.split_cycles(run, cycle_times)
        else:
            cycles = [run]  # single-cycle run compares against cycle 0
        per_run_cycles.append(len(cycles))
        for k, c in enumerate(cycles):
            groups[k % len(bounds)].append(metricsmod.normalize_cycle(c, n))

    reports = []
    for k, members in groups.items():
        if not members:
            continue
        ck0, ck1 = bounds[k]
        commanded = metricsmod.resample_path(plan.t, plan.x, plan.y, n, ck0, ck1)
        reports.append(
            metricsmod.decompose_errors(members, commanded, cte_mode=args.cte_mode)
        )
    report = metricsmod.pool_reports(reports)
    out = Path(args.out) if args.out else _outdir(args) / "error_report.json"
    report.to_json(out)
    if args.per_phase:
        report.per_phase_csv(args.per_phase)
    _note(
        f"cte_rms {report.cte_rms:.4f} mm, ate_rms {report.ate_rms:.4f} mm, "
        f"euclid_rms {report.euclid_rms:.4f} mm over {report.n_runs} normalized cycles"
    )
    return {
        "command": "metrics",
        "report_json": str(out),
        "cycles_per_run": per_run_cycles,
        **report.to_dict(),
    }


def cmd_spectrum(args) -> dict:
    if args.signal:
        sig = spectrummod.LineScanSignal.from_csv(args.signal, fps=args.fps)
        peak = spectrummod.dominant_frequency(sig, snr_threshold=args.snr_threshold)
        result = {"best_mode": "signal", "peak": peak}
        candidates = {}
    else:
        if not args.frames:
            raise CombError("either --frames or --signal is required")
        frames = spectrummod.load_frames(args.frames)
        if args.line:
            line = tuple(float(v) for v in args.line.split(","))
        else:
            line = spectrummod.max_variance_line(frames)
            _note(f"no line given; max-variance heuristic chose {line}")
        result = spectrummod.characterize(
            frames, line, args.fps, snr_threshold=args.snr_threshold
        )
        candidates = {
            mode: (peak.to_dict() if peak else None)
            for mode, peak in result["candidates"].items()
        }
    peak = result["peak"]
    _note(f"dominant frequency {peak.freq:.3f} Hz (snr {peak.snr:.1f})")
    return {
        "command": "spectrum",
        "best_mode": result["best_mode"],
        **peak.to_dict(),
        "candidates": candidates,
    }


def cmd_stitch(args) -> dict:
    plan = scanmod.ScanPlan.from_json(args.plan)
    tiles = mosaicmod.load_tiles(args.tiles, plan)
    result = mosaicmod.compose(
        tiles, plan, px_per_mm=args.px_per_mm, search_radius=args.search_radius
    )
    out = Path(args.out) if args.out else _outdir(args) / "mosaic.png"
    mosaicmod.save_canvas(result.canvas, out)
    placements_path = Path(str(out) + ".placements.json")
    result.placements_json(placements_path)
    residual_max = max(
        (max(abs(r.residual[0]), abs(r.residual[1])) for r in result.residuals),
        default=0,
    )
    _note(f"stitched {len(tiles)} tiles into {result.canvas.shape[1]}x{result.canvas.shape[0]} px")
    return {
        "command": "stitch",
        "mosaic": str(out),
        "placements_json": str(placements_path),
        "tiles": len(tiles),
        "adjacencies": len(result.residuals),
        "max_residual_px": int(residual_max),
        "flags": result.flags,
    }


def cmd_serve(args) -> dict:
    from .service import serve

    cfg = cfgmod.load_config(args.config)
    bind = os.environ.get("COMB_BIND", "")
    host = cfg["service"]["host"]
    port = int(cfg["service"]["port"])
    if bind:
        host, _, p = bind.partition(":")
        port = int(p) if p else port
    if args.host:
        host = args.host
    if args.port:
        port = args.port
    controller = cfgmod.build_controller(cfg)
    _note(f"serving on http://{host}:{port} (speed x{args.speed})")
    serve(controller, host=host, port=port, speed=args.speed,
          console_dir=args.console)
    return {"command": "serve", "host": host, "port": port}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="comb",
        description="Simulated in-hive XY robot platform and analysis toolkit",
    )
    parser.add_argument("--version", action="version", version=f"comb {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out-dir", help="directory for default artifact paths")
    common.add_argument("--seed", type=int, default=0,
                        help="seed for synthetic-data generators")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("maw", parents=[common], help="derive and validate window geometry")
    p.add_argument("--check", metavar="CONFIG", help="config file holding the maw section")
    p.set_defaults(fn=cmd_maw)

    p = sub.add_parser("dance", parents=[common], help="generate a waggle trajectory plan")
    p.add_argument("--params", help="JSON file overriding dance parameters")
    p.add_argument("--out", help="plan CSV path")
    p.add_argument("--json", help="plan JSON path (default: CSV path with .json)")
    p.set_defaults(fn=cmd_dance)

    scan = sub.add_parser("scan", help="scan planning")
    scansub = scan.add_subparsers(dest="scan_command", required=True)
    p = scansub.add_parser("plan", parents=[common], help="compute a raster grid")
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--row-overlap", dest="row_overlap", type=float)
    p.add_argument("--col-overlap", dest="col_overlap", type=float)
    p.add_argument("--footprint-w", dest="footprint_w", type=float)
    p.add_argument("--footprint-h", dest="footprint_h", type=float)
    p.add_argument("--origin", help="x,y of the first footprint corner")
    p.add_argument("--out", help="plan JSON path")
    p.set_defaults(fn=cmd_scan_plan)

    p = sub.add_parser("simulate", parents=[common], help="execute a plan on the simulated stage")
    p.add_argument("--plan", required=True, help="plan CSV or JSON")
    p.add_argument("--out", help="pose log CSV path")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("metrics", parents=[common], help="trajectory error decomposition")
    p.add_argument("--runs", nargs="+", required=True, help="tracked run CSVs (t_s,u_px,v_px)")
    p.add_argument("--plan", required=True, help="commanded plan CSV or JSON")
    p.add_argument("--px-per-mm", dest="px_per_mm", type=float, default=5.48)
    p.add_argument("--n-samples", dest="n_samples", type=int, default=500)
    p.add_argument("--cte-mode", dest="cte_mode", choices=["phase", "projection"],
                   default="phase")
    p.add_argument("--out", help="error report JSON path")
    p.add_argument("--per-phase", dest="per_phase", help="per-phase error CSV path")
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("spectrum", parents=[common], help="dominant line-scan frequency")
    p.add_argument("--frames", help="directory of numbered grayscale frames")
    p.add_argument("--signal", help="scalar signal CSV instead of frames")
    p.add_argument("--fps", type=float, required=True)
    p.add_argument("--line", help="x0,y0,x1,y1 line through the motion")
    p.add_argument("--snr-threshold", dest="snr_threshold", type=float, default=3.0)
    p.set_defaults(fn=cmd_spectrum)

    p = sub.add_parser("stitch", parents=[common], help="register and composite scan tiles")
    p.add_argument("--plan", required=True, help="scan plan JSON")
    p.add_argument("--tiles", required=True, help="directory of numbered tile images")
    p.add_argument("--px-per-mm", dest="px_per_mm", type=float, required=True)
    p.add_argument("--search-radius", dest="search_radius", type=int, default=5)
    p.add_argument("--out", help="mosaic image path")
    p.set_defaults(fn=cmd_stitch)

    p = sub.add_parser("serve", parents=[common], help="run the control service")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--speed", type=float, default=1.0,
                   help="simulated-time multiplier for the tick loop")
    p.add_argument("--console", help="directory of built console files to serve at /")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    np.random.seed(args.seed if hasattr(args, "seed") else 0)
    try:
        summary = args.fn(args)
    except CombError as exc:
        _emit({"error": exc.name, "message": str(exc)})
        return 1
    except OSError as exc:
        _emit({"error": "IOError", "message": str(exc)})
        return 1
    _emit(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
