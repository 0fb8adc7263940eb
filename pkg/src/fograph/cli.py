"""Command-line entry point: ``fograph {validate,simulate,pi-report,sensors-export,migrate-demo}``.

Exit codes: 0 success, 1 I/O error, 2 invalid config, 3 no measurements,
4 legacy migration mismatch.
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path
from typing import Callable, Sequence, TextIO

from fograph import legacy
from fograph.config import apply_overrides, load_scenario, read_config, validate_config
from fograph.errors import InvalidPolicy, SchemaError
from fograph.metrics import parse_band_policy
from fograph.netsim import EventLog, ScenarioReport, Simulation, metrics_from_log

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_NO_MEASUREMENTS = 3
EXIT_MIGRATION = 4


def _err(msg: str) -> None:
    print(f"fograph: {msg}", file=sys.stderr)


def _write(path: Path, data: str | bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    path.write_bytes(data)


def _run(args: argparse.Namespace) -> tuple[Simulation, ScenarioReport]:
    sim = Simulation(load_scenario(args.config, args.override, seed=args.seed))
    _, report = sim.run()
    return sim, report


# -- subcommands -------------------------------------------------------------

def cmd_validate(args: argparse.Namespace) -> int:
    config, text, label = read_config(args.config)
    config = apply_overrides(config, args.override)
    diags = validate_config(config, text, label)
    if diags:
        for d in diags:
            print(d, file=sys.stderr)
        return EXIT_CONFIG
    print("OK")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    sim, report = _run(args)
    out = Path(args.out)
    _write(out / "report.json", report.to_json())
    _write(out / "events.ndjson", sim.log.to_ndjson())
    _write(out / "priority_map.json", report.priority_map.to_json())
    _write(out / "priority_map.dot", sim.dot(report.priority_map))
    (out / "sensors").mkdir(parents=True, exist_ok=True)
    for sid in sim.sensors.sensor_ids:
        _write(out / "sensors" / f"{sid}.csv", sim.sensors.export_csv(sid))
    print(f"wrote {out} ({report.requests} requests, {report.probe_rounds} probe rounds)")
    return EXIT_OK


def cmd_pi_report(args: argparse.Namespace) -> int:
    policy = parse_band_policy(args.band_policy) if args.band_policy else None
    src = Path(args.input)
    if src.suffix == ".ndjson":
        try:
            event_log = EventLog.from_ndjson(src.read_text(encoding="utf-8"))
        except ValueError as exc:
            _err(f"{src}: {exc}")
            return EXIT_CONFIG
        store, topo = metrics_from_log(event_log)
        edges = [tuple(e) for e in topo["edges"]] if topo else []
        routers = topo["routers"] if topo else []
        end = max((e["t_us"] for e in event_log), default=0) / 1_000_000
    else:
        sim, _ = _run(args)
        store = sim.metrics
        edges = sim.topology.edges()
        routers = [r.router_id for r in sim.topology.access_routers]
        end = float(sim.scenario.duration_s)
        policy = policy or sim.scenario.band_policy
    if len(store) == 0:
        _err("no response-time measurements in input")
        return EXIT_NO_MEASUREMENTS
    pmap = store.priority_map(policy=policy, generated_at=end)
    sys.stdout.write(pmap.to_json())
    if args.dot:
        _write(Path(args.dot), pmap.to_dot(edges, routers))
    return EXIT_OK


def cmd_sensors_export(args: argparse.Namespace) -> int:
    sim, _ = _run(args)
    ids = [args.sensor] if args.sensor else sim.sensors.sensor_ids
    out = Path(args.out)
    for sid in ids:
        try:
            data = sim.sensors.export_csv(sid, args.t0, args.t1)
        except KeyError:
            _err(f"unknown sensor {sid!r}")
            return EXIT_CONFIG
        _write(out / f"{sid}.csv", data)
        rows = data.count(b"\n") - 1
        print(f"{sid}: {rows} readings")
    return EXIT_OK


def _faulty(handler: legacy.Handler) -> legacy.Handler:
    return lambda req: handler(req) + b"~"


def migration_cases(count: int, seed: int) -> list[bytes]:
    rng = random.Random(seed)
    cases = [legacy.encode_calc("add", 2, 3)]
    ops = ["add", "sub", "mul", "div"]
    while len(cases) < count:
        cases.append(legacy.encode_calc(rng.choice(ops), rng.randint(-10**6, 10**6), rng.randint(-10**6, 10**6)))
    return cases[:count]


def run_migration_demo(
    cases: Sequence[bytes],
    inject_fault: bool = False,
    out: TextIO | None = None,
) -> int:
    """Call the bundled calculating service directly and through its proxy; return mismatch count."""
    from fograph.registry import Granularity, ServiceDescriptor

    out = out or sys.stdout
    direct: Callable[[bytes], bytes] = legacy.CALCULATING_SERVICE.handler
    source = legacy.CALCULATING_SERVICE
    if inject_fault:
        source = legacy.LegacyService(source.legacy_id, _faulty(source.handler))
    wrapped = legacy.wrap_legacy(source, ServiceDescriptor("svc-calculating", "calculating-service", Granularity.MACRO))
    mismatches = 0
    for req in cases:
        a = direct(req)
        b = wrapped.endpoint(legacy.ServiceRequest(wrapped.service_id, req)).payload
        ok = a == b
        mismatches += not ok
        print(f"{req.decode()} | direct={a.decode()} | wrapped={b.decode()} | {'ok' if ok else 'MISMATCH'}", file=out)
    print(f"{len(cases) - mismatches}/{len(cases)} pairs equal", file=out)
    return mismatches


def cmd_migrate_demo(args: argparse.Namespace) -> int:
    mismatches = run_migration_demo(migration_cases(args.cases, args.seed or 0), args.inject_fault)
    return EXIT_MIGRATION if mismatches else EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fograph", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("config", help="scenario JSON file, or 'default' for the bundled lab scenario")
        p.add_argument("--override", "-O", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted-key override applied after parsing (repeatable)")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed and $FOGRAPH_SEED")

    p = sub.add_parser("validate", help="check a scenario config")
    scenario_args(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="run a scenario and write all artifacts")
    scenario_args(p)
    p.add_argument("--out", "-o", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pi-report", help="print the priority map of a scenario or events.ndjson")
    p.add_argument("input", help="scenario config or events.ndjson")
    p.add_argument("--override", "-O", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--band-policy", default=None, help="'quantile' or 'absolute:BLUE_MAX,YELLOW_MAX'")
    p.add_argument("--dot", default=None, help="also write a Graphviz file here")
    p.set_defaults(func=cmd_pi_report, config=None)

    p = sub.add_parser("sensors-export", help="run a scenario and export sensor CSVs")
    scenario_args(p)
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--sensor", default=None)
    p.add_argument("--t0", type=float, default=float("-inf"))
    p.add_argument("--t1", type=float, default=float("inf"))
    p.set_defaults(func=cmd_sensors_export)

    p = sub.add_parser("migrate-demo", help="compare legacy vs wrapped calculating service")
    p.add_argument("--cases", type=int, default=20)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_migrate_demo)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "pi-report":
        args.config = args.input
    try:
        return args.func(args)
    except SchemaError as exc:
        for d in exc.diagnostics:
            print(d, file=sys.stderr)
        return EXIT_CONFIG
    except InvalidPolicy as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
