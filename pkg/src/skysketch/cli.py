"""Command-line front door: serve the gateway, run scenarios, bench, replay.

The CLI is a thin client of the library: `serve` wires a control loop into
the FastAPI app and hands it to uvicorn; `run` executes a scenario file
headless; `bench` measures the tracker; `replay` re-executes the scenario
embedded in a previous run's report and verifies the new report is
byte-identical — the reproducibility claim as a command.
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from pathlib import Path

import yaml

from .control import ControlLoop, LoopConfig
from .harness import (
    RunnerError,
    ScenarioError,
    bench_tracker,
    format_bench_report,
    load_scenario,
    parse_scenario,
    run_scenario,
)
from .harness.scenario import Scenario
from .tracker import TrackerConfig

DEFAULT_PORT = 8040


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skysketch",
        description="Sketch-driven ground control for a simulated camera quadcopter.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the websocket/REST gateway")
    serve.add_argument("--port", type=int, default=DEFAULT_PORT)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--scene", type=Path, default=None,
                       help="scenario file providing the scene/drone/camera blocks")
    serve.add_argument("--seed", type=int, default=None,
                       help="RNG seed (overrides the scene file's seed)")
    serve.add_argument("--headless", action="store_true",
                       help="serve the API only; do not mount UI assets")
    serve.add_argument("--speed-cap", type=float, default=None,
                       help="cap on stroke-commanded speed, 0 < cap <= 1")
    serve.add_argument("--psr-threshold", type=float, default=None,
                       help="tracking-confidence floor for valid/capture decisions")
    serve.add_argument("--capture-dir", type=Path, default=Path("captures"))
    serve.add_argument("--sim-speed", type=float, default=1.0,
                       help="simulation speed multiplier for the realtime loop")
    serve.add_argument("--telemetry-hz", type=float, default=10.0,
                       help="telemetry publish rate in sim-time Hz (max 100)")
    serve.add_argument("--token", default=None,
                       help="shared token clients must present (?token=...)")
    serve.add_argument("--ui-dir", type=Path, default=Path("frontend/dist"),
                       help="static UI assets to mount at / (ignored with --headless)")

    run = sub.add_parser("run", help="execute a scenario file headless")
    run.add_argument("scenario", type=Path)
    run.add_argument("--out", type=Path, default=None,
                     help="artifact directory (default: runs/<scenario name>)")
    run.add_argument("--seed", type=int, default=None,
                     help="override the scenario's seed")

    bench = sub.add_parser("bench", help="tracker accuracy and throughput")
    bench.add_argument("--trials", type=int, default=1000)
    bench.add_argument("--cycles", type=int, default=500)
    bench.add_argument("--window", type=int, default=64)
    bench.add_argument("--seed", type=int, default=2024)
    bench.add_argument("--out", type=Path, default=None,
                       help="also write the full report as JSON")

    replay = sub.add_parser(
        "replay", help="re-run the scenario inside a report and verify reproducibility"
    )
    replay.add_argument("report", type=Path)
    replay.add_argument("--out", type=Path, default=None,
                        help="artifact directory for the replayed run")
    return parser


# -------------------------------------------------------------------- helpers


def _scenario_for_serving(args: argparse.Namespace) -> Scenario:
    if args.scene is not None:
        scenario = load_scenario(args.scene)
        if scenario.script:
            print(
                f"note: {args.scene} has a script; serve ignores it "
                "(use `skysketch run` to execute scripts)",
                file=sys.stderr,
            )
        return scenario
    return parse_scenario("{}", source="default")


def make_serve_loop(args: argparse.Namespace) -> ControlLoop:
    """Control loop configured from a serve invocation (CLI flags win)."""
    scenario = _scenario_for_serving(args)
    seed = scenario.seed if args.seed is None else args.seed
    speed_cap = scenario.speed_cap if args.speed_cap is None else args.speed_cap
    if not 0.0 < speed_cap <= 1.0:
        raise ScenarioError(f"speed cap must lie in (0, 1], got {speed_cap}",
                            source="serve arguments")
    telemetry_hz = getattr(args, "telemetry_hz", 10.0)
    if not 0.0 < telemetry_hz <= 100.0:
        raise ScenarioError(
            f"telemetry rate must lie in (0, 100] Hz, got {telemetry_hz}",
            source="serve arguments",
        )
    tracker_config = scenario.tracker_config
    if args.psr_threshold is not None:
        if args.psr_threshold <= 0:
            raise ScenarioError(
                f"psr threshold must be positive, got {args.psr_threshold}",
                source="serve arguments",
            )
        tracker_config = TrackerConfig(
            window_size=tracker_config.window_size,
            target_sigma=tracker_config.target_sigma,
            learn_rate=tracker_config.learn_rate,
            regularizer=tracker_config.regularizer,
            train_samples=tracker_config.train_samples,
            psr_threshold=args.psr_threshold,
            context=tracker_config.context,
        )
    return ControlLoop(
        scene=scenario.build_scene() if scenario.scene_config.get("objects") else None,
        camera=scenario.camera,
        drone_config=scenario.drone_config,
        tracker_config=tracker_config,
        config=LoopConfig(
            speed_cap=speed_cap,
            capture_period_ms=scenario.capture_period_ms,
            servo_mode=scenario.servo_mode,
            capture_dir=str(args.capture_dir),
            telemetry_hz=telemetry_hz,
        ),
        seed=seed,
        session_prefix="serve",
        scene_ref=str(args.scene) if args.scene else "",
        initial_state=scenario.drone_start,
    )


def make_serve_app(args: argparse.Namespace):
    """The ASGI app for a serve invocation (separated for tests)."""
    from .gateway import create_app

    loop = make_serve_loop(args)
    ui_dir = None
    if not args.headless and args.ui_dir is not None and Path(args.ui_dir).is_dir():
        ui_dir = Path(args.ui_dir)
    app = create_app(loop, token=args.token, ui_dir=ui_dir)
    return app, loop


# ------------------------------------------------------------------- commands


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    app, loop = make_serve_app(args)
    loop.start_realtime(args.sim_speed)
    mode = "headless" if args.headless else "with UI assets"
    print(f"serving on {args.host}:{args.port} ({mode}, sim x{args.sim_speed:g})")
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    out = args.out if args.out is not None else Path("runs") / scenario.name
    report = run_scenario(scenario, out, seed=args.seed)
    print(f"scenario   : {report['name']} (seed {report['seed']})")
    print(f"duration   : {report['duration_s']:.2f} s simulated")
    print(f"commands   : {report['command_count']} | frames: {report['frames']}")
    if report["arrivals"]:
        worst = max(a["dist"] for a in report["arrivals"])
        print(f"arrivals   : {len(report['arrivals'])} (worst miss {worst:.3f} m)")
    if report["tracking"] is not None:
        t = report["tracking"]
        conv = "never" if t["time_to_converge_s"] is None else f"{t['time_to_converge_s']:.2f} s"
        print(f"tracking   : converged {conv}, valid ratio {t['valid_ratio']:.2f}")
    caps = report["captures"]
    if caps["accepted"] or caps["rejected"]:
        print(f"captures   : {caps['accepted']} accepted, {caps['rejected']} rejected")
    print(f"artifacts  : {out / 'report.json'}, {out / 'path.csv'}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    report = bench_tracker(
        trials=args.trials, cycles=args.cycles, window=args.window, seed=args.seed
    )
    print(format_bench_report(report))
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
        print(f"report written to {args.out}")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        original = json.loads(args.report.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read report: {exc}", file=sys.stderr)
        return 2
    if not isinstance(original, dict) or "scenario" not in original or "seed" not in original:
        print("error: report carries no embedded scenario to replay", file=sys.stderr)
        return 2

    text = yaml.safe_dump(original["scenario"], sort_keys=False)
    scenario = parse_scenario(text, source=f"{args.report} (embedded scenario)")
    out = args.out if args.out is not None else Path(
        tempfile.mkdtemp(prefix="skysketch-replay-")
    )
    run_scenario(scenario, out, seed=original["seed"])
    replayed = (out / "report.json").read_bytes()
    matches = replayed == args.report.read_bytes()
    print(f"replayed   : {scenario.name} (seed {original['seed']}) -> {out}")
    print(f"reproduced : {'yes — byte-identical report' if matches else 'NO — report differs'}")
    return 0 if matches else 1


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "serve": cmd_serve,
        "run": cmd_run,
        "bench": cmd_bench,
        "replay": cmd_replay,
    }
    try:
        return handlers[args.command](args)
    except (ScenarioError, RunnerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
