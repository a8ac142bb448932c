"""Command line entry point.

    einstall validate <manifest.json>
    einstall run --scene <path|vf|mc> [--capsule DIR] [--script s.json]
                 --ticks N [--seed S] [options] --out trace.ndjson
    einstall metrics trace.ndjson
    einstall serve --scene <path|vf|mc> [--capsule DIR] [--tcp-port N] [--ws-port N]
    einstall ingest SRC_DIR --out CAPSULE_DIR

Exit codes: 0 success, 1 validation failure, 2 runtime error.
"""

from __future__ import annotations

import argparse
import asyncio
import shutil
import sys
from pathlib import Path

from . import protocol, sim_harness
from .content_capsule import Capsule, CapsuleError, ingest_directory, open_capsule
from .jsonio import dumps_pretty
from .motion_compression import CompressionConfig, Workspace
from .reenactment_engine import EngineConfig, EngineError
from .scene_model import (
    ManifestError,
    SceneManifest,
    builtin_scene,
    parse_manifest,
    validate_manifest,
)
from .sim_harness import ScriptError, WalkScript, compute_metrics, load_trace, load_walk_script, run_scripted, write_trace
from .tracking import load_sensors

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


class _CliFailure(Exception):
    def __init__(self, code: int, message: str) -> None:
        super().__init__(message)
        self.code = code


def _load_scene(name: str) -> SceneManifest:
    if name in ("vf", "mc"):
        return builtin_scene(name)
    path = Path(name)
    if not path.is_file():
        raise _CliFailure(EXIT_RUNTIME, f"scene file not found: {name}")
    try:
        return parse_manifest(path.read_bytes())
    except ManifestError as exc:
        raise _CliFailure(EXIT_INVALID, f"invalid manifest {name}: {exc}") from None


def _load_capsule(arg: str | None) -> Capsule | None:
    if arg is None:
        return None
    try:
        return open_capsule(arg)
    except CapsuleError as exc:
        raise _CliFailure(EXIT_INVALID, f"invalid capsule {arg}: {exc}") from None


def _engine_config(args: argparse.Namespace) -> EngineConfig:
    return EngineConfig(
        tick_rate=args.tick_rate,
        delay_emulation=args.delay_emulation,
        delay_offset=args.delay_offset,
        rng_seed=args.seed,
    )


def _compression(args: argparse.Namespace) -> CompressionConfig:
    return CompressionConfig(kappa_max=args.kappa_max, steer_gain=args.steer_gain)


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="64-bit seed for playlists and sensor noise")
    p.add_argument("--tick-rate", type=float, default=30.0, help="engine ticks per second")
    p.add_argument("--delay-emulation", action="store_true", help="emulate inter-circuit video delay")
    p.add_argument("--delay-offset", type=float, default=0.5, help="emulated delay in seconds")
    p.add_argument("--kappa-max", type=float, default=CompressionConfig().kappa_max, help="max injected curvature (1/m)")
    p.add_argument("--steer-gain", type=float, default=CompressionConfig().steer_gain, help="steering gain (1/m)")


def _cmd_validate(args: argparse.Namespace) -> int:
    path = Path(args.manifest)
    if not path.is_file():
        raise _CliFailure(EXIT_RUNTIME, f"manifest file not found: {args.manifest}")
    try:
        manifest = parse_manifest(path.read_bytes())
    except ManifestError as exc:
        print(f"INVALID: {exc}")
        return EXIT_INVALID
    violations = validate_manifest(manifest)
    if violations:
        for v in violations:
            print(f"INVALID: {v.path}: {v.message}")
        return EXIT_INVALID
    print(
        f"OK scene_id={manifest.scene_id} nodes={len(manifest.nodes)} "
        f"channels={len(manifest.channels)} projectors={len(manifest.projectors)}"
    )
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    manifest = _load_scene(args.scene)
    capsule = _load_capsule(args.capsule)
    script = load_walk_script(args.script) if args.script else WalkScript(steps=())
    sensors = load_sensors(args.sensors) if args.sensors else None
    try:
        trace = run_scripted(
            manifest,
            capsule,
            script,
            ticks=args.ticks,
            engine_config=_engine_config(args),
            compression=_compression(args),
            workspace=Workspace(),
            sensors=sensors,
        )
    except (ScriptError, EngineError) as exc:
        raise _CliFailure(EXIT_RUNTIME, str(exc)) from None
    write_trace(trace, args.out)
    print(f"wrote {args.out}: {len(trace.records)} records, trace_hash={trace.trace_hash()}")
    return EXIT_OK


def _cmd_metrics(args: argparse.Namespace) -> int:
    try:
        trace = load_trace(args.trace)
        report = compute_metrics(trace)
    except (OSError, ValueError) as exc:
        raise _CliFailure(EXIT_RUNTIME, f"cannot compute metrics: {exc}") from None
    sys.stdout.write(dumps_pretty(report.to_jsonable()))
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    manifest = _load_scene(args.scene)
    capsule = _load_capsule(args.capsule)
    try:
        asyncio.run(
            protocol.serve(
                manifest,
                capsule,
                _engine_config(args),
                host=args.host,
                tcp_port=args.tcp_port,
                ws_port=args.ws_port,
                compression=_compression(args),
            )
        )
    except KeyboardInterrupt:
        pass
    except EngineError as exc:
        raise _CliFailure(EXIT_RUNTIME, str(exc)) from None
    return EXIT_OK


def _cmd_ingest(args: argparse.Namespace) -> int:
    src = Path(args.src)
    out = Path(args.out)
    if not src.is_dir():
        raise _CliFailure(EXIT_RUNTIME, f"source directory not found: {src}")
    try:
        if src.resolve() != out.resolve():
            if out.exists():
                raise _CliFailure(EXIT_RUNTIME, f"output directory already exists: {out}")
            shutil.copytree(src, out)
        capsule = ingest_directory(out)
    except CapsuleError as exc:
        raise _CliFailure(EXIT_RUNTIME, f"ingest failed: {exc}") from None
    n = sum(len(items) for items in capsule.index.values())
    print(f"ingested {n} items across {len(capsule.cities())} cities into {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="einstall", description="e-Installation re-enactment engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a scene manifest file")
    p.add_argument("manifest")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("run", help="run a deterministic scripted visit")
    p.add_argument("--scene", required=True, help="manifest path or builtin name (vf, mc)")
    p.add_argument("--capsule", help="capsule directory")
    p.add_argument("--script", help="walk script JSON")
    p.add_argument("--ticks", type=int, required=True)
    p.add_argument("--sensors", help="sensor fixture JSON (default: built-in ring of 8)")
    p.add_argument("--out", required=True, help="trace output path (NDJSON)")
    _add_engine_flags(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("metrics", help="compute metrics from a trace file")
    p.add_argument("trace")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("serve", help="serve live sessions over TCP and WebSocket")
    p.add_argument("--scene", required=True, help="manifest path or builtin name (vf, mc)")
    p.add_argument("--capsule", help="capsule directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--tcp-port", type=int, default=7777)
    p.add_argument("--ws-port", type=int, default=7778)
    _add_engine_flags(p)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("ingest", help="index a city/slot media tree into a capsule")
    p.add_argument("src")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
