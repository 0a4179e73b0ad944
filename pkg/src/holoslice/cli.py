"""``holoslice`` command line: run scenarios, compare reports, serve the API."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import HolosliceError
from .scenarios import FIG3_TOPOLOGY, FULL_FRAMES, SCENARIOS, ScenarioSpec, compare, run_scenario
from .sim import MetricsReport


def _spec(name: str, args) -> ScenarioSpec:
    return ScenarioSpec(
        name=name,
        topology=args.topology,
        frames=FULL_FRAMES if args.full else args.frames,
        frame_size=args.frame_size,
        fps=args.fps,
        mtu=args.mtu,
        ratio=args.ratio,
        transcoder_delay_ms=args.transcoder_delay_ms,
        backend=args.backend,
    )


def _run_one(spec_and_out):
    spec, out, trace = spec_and_out
    report = run_scenario(spec, out, write_trace=trace)
    return spec.name, report


def cmd_run(args) -> int:
    names = list(SCENARIOS) if "all" in args.scenario else args.scenario
    jobs = [(_spec(n, args), args.out, not args.no_trace) for n in names]
    if args.parallel and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=len(jobs)) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    for name, rep in results:
        lat = " ".join(f"{h}={v * 1e3:.3f}ms" for h, v in rep.avg_latency.items())
        print(f"{name}: load={rep.network_load:.4f} dropped={rep.dropped} {lat}")
    if args.out:
        print(f"reports written to {args.out}/")
    return 0


def cmd_compare(args) -> int:
    reports = [MetricsReport.read(p) for p in args.reports]
    comp = compare(reports, baseline=args.baseline)
    print(comp.to_text())
    if args.json:
        Path(args.json).write_text(json.dumps(comp.to_dict(), indent=2) + "\n")
    return 0 if all(comp.checks.values()) else 1


def cmd_serve(args) -> int:
    from .api import serve
    from .engine import SliceEngine, load_catalog
    from .monitor import BACKENDS, NetworkState
    from .topology import load_topology

    topo = load_topology(Path(args.topology) if args.topology else FIG3_TOPOLOGY)
    catalog = load_catalog(Path(args.catalog) if args.catalog else None)
    engine = SliceEngine(topo, BACKENDS[args.backend](NetworkState(topo)), catalog)
    serve(engine, args.addr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="holoslice", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one or more scenarios")
    r.add_argument("--scenario", action="append", required=True,
                   choices=[*SCENARIOS, "all"], help="repeatable; 'all' runs the five scenarios")
    r.add_argument("--topology", help="topology file (default: packaged fig3.topo)")
    r.add_argument("--out", help="directory for <scenario>.json and <scenario>.csv")
    r.add_argument("--frames", type=int, default=1000)
    r.add_argument("--full", action="store_true", help=f"stream all {FULL_FRAMES} frames")
    r.add_argument("--frame-size", type=int, default=9000, help="bytes per frame")
    r.add_argument("--fps", type=float, default=30.0)
    r.add_argument("--mtu", type=int, default=1500)
    r.add_argument("--ratio", type=float, help="transcoder size ratio")
    r.add_argument("--transcoder-delay-ms", type=float)
    r.add_argument("--backend", choices=["direct", "controller"], default="direct")
    r.add_argument("--seedless", action="store_true",
                   help="accepted for compatibility; runs never use randomness")
    r.add_argument("--no-trace", action="store_true", help="skip the per-packet CSV")
    r.add_argument("--parallel", action="store_true", help="one process per scenario")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="compare scenario reports")
    c.add_argument("reports", nargs="+")
    c.add_argument("--baseline")
    c.add_argument("--json", help="also write the comparison as JSON")
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("serve", help="start the slice management API")
    s.add_argument("--addr", help="host:port (default: $HOLOSLICE_ADDR or 127.0.0.1:8080)")
    s.add_argument("--topology")
    s.add_argument("--catalog")
    s.add_argument("--backend", choices=["direct", "controller"], default="controller")
    s.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose or args.command == "serve" else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except HolosliceError as exc:
        print(f"holoslice: {exc.code}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
