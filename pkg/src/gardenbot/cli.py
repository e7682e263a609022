"""Command-line entry points.

Exit codes: 0 success, 1 script problem (validation diagnostics), 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .engine import GardenEngine
from .errors import GardenError, ScriptInvalid
from .scenario import ScenarioRun, load_script, validate_script

EXIT_OK = 0
EXIT_SCRIPT = 1
EXIT_RUNTIME = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gardenbot",
        description="Garden robot simulator: scripted campaigns and live service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario script and print its report")
    run.add_argument("script", help="path to a scenario YAML file")
    run.add_argument("--seed", default=None,
                     help="override the script's stochastic seed")
    run.add_argument("--out", default=None, metavar="DIR",
                     help="directory for report.txt / report.json")
    run.add_argument("--journal", default=None, metavar="PATH",
                     help="write the append-only event journal to this file")
    run.add_argument("--acceleration", type=float, default=None,
                     help="accepted for compatibility; scripted runs use "
                          "virtual time and are not paced")
    run.add_argument("--frames", default=None, metavar="DIR",
                     help="also export daily frame PNGs to this directory")

    val = sub.add_parser("validate", help="check a scenario script")
    val.add_argument("script", help="path to a scenario YAML file")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--acceleration", type=float, default=60.0,
                       help="simulated seconds per wall second (default 60)")
    serve.add_argument("--journal", default=None, metavar="PATH",
                       help="journal file; restored from if it exists")
    serve.add_argument("--rain-days", default="",
                       help="comma-separated simulated day indices with rain")
    return parser


def _cmd_validate(args: argparse.Namespace) -> int:
    try:
        doc, base_dir = load_script(args.script)
    except ScriptInvalid as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_SCRIPT
    diags = validate_script(doc, base_dir)
    for d in diags:
        print(f"{args.script}:{d}", file=sys.stderr)
    if diags:
        print(f"{len(diags)} problem(s) found", file=sys.stderr)
        return EXIT_SCRIPT
    print("ok")
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        doc, base_dir = load_script(args.script)
        run = ScenarioRun(doc, base_dir, seed=args.seed,
                          journal_path=args.journal)
    except ScriptInvalid as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        for line in exc.details.get("diagnostics", []):
            print(f"  {line}", file=sys.stderr)
        return EXIT_SCRIPT
    try:
        report = run.run()
    except Exception as exc:  # noqa: BLE001 - surfaced as exit code 2
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        run.engine.close()
    text = report.to_text()
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text)
        (out / "report.json").write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
        )
    if args.frames:
        from .snapshots import export_timelapse
        export_timelapse(run.engine.timelapse, args.frames, None, "topdown")
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    try:
        import uvicorn
    except ImportError:
        print("uvicorn is required for `gardenbot serve`", file=sys.stderr)
        return EXIT_RUNTIME

    from .api import EngineRunner, create_app
    from .weather import StubProvider

    try:
        if args.journal and Path(args.journal).exists():
            engine = GardenEngine.restore(args.journal)
        else:
            rain = {int(d) for d in args.rain_days.split(",") if d.strip()}
            engine = GardenEngine(journal_path=args.journal)
            engine.weather = StubProvider(engine.epoch, rain_days=rain)
        engine.clock.set_acceleration(args.acceleration)
    except GardenError as exc:
        print(f"cannot start: {exc.message}", file=sys.stderr)
        return EXIT_RUNTIME

    runner = EngineRunner(engine)
    runner.start()
    try:
        uvicorn.run(create_app(engine), host=args.host, port=args.port,
                    log_level="info")
    finally:
        runner.stop()
        engine.close()
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "validate":
        return _cmd_validate(args)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_serve(args)


if __name__ == "__main__":
    sys.exit(main())
