"""Command-line entry points.

Verbs:
  validate  check a scenario file against the invariants
  run       full simulation with artifact export
  tables    emit the three section tables plus reference comparisons
  locate    solve the crossover coordinates from an inlet series file
  serve     run the simulation with the stream service attached
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

from .domain import benchmark_scenario_path, load_scenario, validate_scenario
from .errors import GastwinError, ScenarioValidationError
from .localization import estimate_sections
from .runner import RunConfig, export_tables, run, write_fig3_profiles
from .stream import HttpTap, serve_stream
from .transient import SectionModels, TABLE_OFFSETS
from .world import World, WorldConfig


def _add_scenario_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--scenario",
        type=Path,
        default=benchmark_scenario_path(),
        help="scenario JSON file (default: packaged benchmark scenario)",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gastwin", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("validate", help="validate a scenario file")
    _add_scenario_arg(p)

    p = sub.add_parser("run", help="run a scenario end to end")
    _add_scenario_arg(p)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--horizon", type=float, default=None, help="seconds (default t1 + 600)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("automatic", "operator_confirm"), default="automatic")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--noise-sigma", type=float, default=0.0)

    p = sub.add_parser("tables", help="emit section tables and comparisons")
    _add_scenario_arg(p)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument(
        "--offsets",
        type=str,
        default=",".join(str(int(a)) for a in TABLE_OFFSETS),
        help="comma-separated seconds after closure (empty for header-only tables)",
    )

    p = sub.add_parser("locate", help="solve crossover coordinates from telemetry")
    p.add_argument("--series", type=Path, required=True, help="CSV with t_s,pressure_pa")
    p.add_argument("--spec", type=Path, default=benchmark_scenario_path(),
                   help="scenario JSON supplying the passport constants")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--t1", type=float, required=True)

    p = sub.add_parser("serve", help="run with the operator stream attached")
    _add_scenario_arg(p)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("automatic", "operator_confirm"),
                   default="operator_confirm")
    p.add_argument("--port", type=int, default=9301, help="NDJSON TCP port")
    p.add_argument("--http-port", type=int, default=9302, help="browser tap port")
    p.add_argument("--speed", type=float, default=10.0,
                   help="simulated seconds per wall second")
    p.add_argument("--console-dir", type=Path, default=None,
                   help="static console bundle to serve at /")
    return parser


def _cmd_validate(args) -> int:
    try:
        spec, scenario = load_scenario(args.scenario, validate=False)
    except GastwinError as exc:
        print(f"scenario file unreadable: {exc}", file=sys.stderr)
        return 2
    violations = validate_scenario(spec, scenario)
    if violations:
        print("INVALID:")
        for v in violations:
            print(f"  - {v}")
        return 1
    print("scenario valid")
    return 0


def _cmd_run(args) -> int:
    try:
        result = run(
            RunConfig(
                scenario_path=args.scenario,
                out_dir=args.out,
                dt=args.dt,
                horizon=args.horizon,
                seed=args.seed,
                mode=args.mode,
                noise_sigma=args.noise_sigma,
            )
        )
    except ScenarioValidationError as exc:
        print("invalid scenario:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return 1
    report = result.report
    print(f"run complete: phase={report['phase']} t2={report['t2_s']}")
    for name, ok in report["checks"].items():
        print(f"  check {name}: {'pass' if ok else 'FAIL'}")
    print(f"artifacts in {result.out_dir}")
    return result.exit_code


def _cmd_tables(args) -> int:
    spec, scenario = load_scenario(args.scenario)
    offsets = tuple(float(a) for a in args.offsets.split(",") if a != "") if args.offsets else ()
    models = SectionModels.from_scenario(spec, scenario)
    args.out.mkdir(parents=True, exist_ok=True)
    export_tables(models, args.out, offsets)
    if offsets:
        write_fig3_profiles(spec, models, args.out / "fig3_profiles.csv", offsets)
    print(f"tables written to {args.out}")
    return 0


def _cmd_locate(args) -> int:
    spec, _ = load_scenario(args.spec, validate=False)
    rows: list[tuple[float, float]] = []
    with open(args.series, encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.append((float(row["t_s"]), float(row["pressure_pa"])))
    rows.sort()
    if not rows:
        print("series file has no rows", file=sys.stderr)
        return 2

    def at_or_before(t: float) -> float | None:
        best = None
        for ts, ps in rows:
            if ts <= t + 1e-9:
                best = ps
        return best

    p_t1 = at_or_before(args.t1)
    p_now = at_or_before(args.t)
    if p_t1 is None or p_now is None:
        print("series does not cover the requested times", file=sys.stderr)
        return 2
    if p_now < p_t1:
        print(
            f"inlet rise is negative (Z = {p_now - p_t1:.1f} Pa): the closure "
            "signature is absent, so the localization formula does not apply",
            file=sys.stderr,
        )
        return 1
    est = estimate_sections(p_now, p_t1, args.t, args.t1, spec)
    print(f"Z   = {est.Z:.1f} Pa")
    print(f"Z1  = {est.Z1:.6f}")
    print(f"l1  = {est.l1_hat:.1f} m (snapped: {est.l1_snapped:.0f} m)")
    print(f"l3  = {est.l3_hat:.1f} m (snapped: {est.l3_snapped:.0f} m)")
    return 0


def _cmd_serve(args) -> int:
    spec, scenario = load_scenario(args.scenario)
    world = World(
        spec,
        scenario,
        WorldConfig(dt=args.dt, horizon=args.horizon, seed=args.seed, mode=args.mode),
    )

    def sink(action: str, valve_id: str, operator_id: str) -> str | None:
        world.inject_operator_command(action, valve_id, operator_id)
        return None

    known = set(world.registry)
    service = serve_stream(args.port, world.bus, sink, known_valves=known)
    tap = HttpTap(world.bus, sink, known_valves=known, static_dir=args.console_dir)
    _, http_port = tap.serve(port=args.http_port)
    print(f"stream: tcp://127.0.0.1:{args.port}  console: http://127.0.0.1:{http_port}/")
    try:
        while world.t <= world.horizon + 1e-9:
            world.tick()
            if args.speed > 0:
                time.sleep(world.config.dt / args.speed)
    except KeyboardInterrupt:
        pass
    finally:
        service.close()
        tap.close()
    print(f"simulation finished: phase={world.center.phase.value} t2={world.center.t2}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {
        "validate": _cmd_validate,
        "run": _cmd_run,
        "tables": _cmd_tables,
        "locate": _cmd_locate,
        "serve": _cmd_serve,
    }[args.verb]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
