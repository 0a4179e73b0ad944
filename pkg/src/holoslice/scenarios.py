"""The five transcoding-placement scenarios on the canonical 11-switch topology,
and cross-scenario comparison."""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Optional

from .dataplane import ExternSpec
from .engine import (
    Catalog,
    NearAudience,
    NearSource,
    SliceEngine,
    SliceRecord,
    SliceRequest,
    StepCosts,
    load_catalog,
)
from .errors import ConfigError, RouteMismatchError, WorkloadMismatchError
from .monitor import BACKENDS, NetworkState
from .sim import FlowSpec, MetricsReport, SimResult, run, write_trace_csv
from .topology import NodeId, Topology, load_topology

DATA_DIR = FsPath(__file__).parent / "data"
FIG3_TOPOLOGY = DATA_DIR / "fig3.topo"

SCENARIOS = ("ec1", "ec2", "hosts", "inc_audience", "inc_source")
HOSTS = ("host1", "host2", "host3", "host4", "host5")
SOURCE = "streamsrv"
FULL_FRAMES = 36000
JITTER_BOUND_S = 0.015

_DIRECT = {
    "host1": ("S10", "S8", "S11"),
    "host2": ("S10", "S8", "S11"),
    "host3": ("S10", "S7", "S4", "S2"),
    "host4": ("S10", "S7", "S4", "S2"),
    "host5": ("S10", "S8", "S5", "S1"),
}

# switch sequences of the published routes, per destination
PUBLISHED_ROUTES: dict[str, dict[NodeId, tuple[str, ...]]] = {
    "ec1": {
        "edge1": ("S10", "S8", "S5", "S6", "S3"),
        "host1": ("S3", "S6", "S9", "S11"),
        "host2": ("S3", "S6", "S9", "S11"),
        "host3": ("S3", "S1", "S2"),
        "host4": ("S3", "S1", "S2"),
        "host5": ("S3", "S1"),
    },
    "ec2": {"edge2": ("S10",), **_DIRECT},
    "hosts": dict(_DIRECT),
    "inc_audience": dict(_DIRECT),
    "inc_source": dict(_DIRECT),
}

PUBLISHED_PLACEMENTS = {"inc_audience": {"S11", "S1", "S2"}, "inc_source": {"S10"}}

# hop-count ties the lexicographic tie-break would resolve differently
_PINNED = {"ec1": {"edge1": (SOURCE, "S10", "S8", "S5", "S6", "S3", "edge1")}}


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    topology: Optional[str] = None
    frames: int = 1000
    frame_size: int = 9000
    fps: float = 30.0
    mtu: int = 1500
    ratio: Optional[float] = None
    transcoder_delay_ms: Optional[float] = None
    step_costs: Optional[StepCosts] = None
    backend: str = "direct"
    latency_bound_s: float = 0.5
    attendees: tuple[str, ...] = HOSTS

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.name!r}; choose from {', '.join(SCENARIOS)}")
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}")

    @property
    def stream_bps(self) -> float:
        return self.frame_size * 8 * self.fps


@dataclass
class ScenarioSetup:
    spec: ScenarioSpec
    topology: Topology
    network: NetworkState
    engine: SliceEngine
    record: SliceRecord
    flow: FlowSpec
    edge_functions: dict[NodeId, ExternSpec]


def scenario_catalog(spec: ScenarioSpec, catalog: Optional[Catalog] = None) -> Catalog:
    catalog = catalog or load_catalog()
    changes = {}
    if spec.ratio is not None:
        changes["ratio"] = spec.ratio
    if spec.transcoder_delay_ms is not None:
        changes["per_packet_delay_ns"] = int(round(spec.transcoder_delay_ms * 1_000_000))
    return catalog.with_override("transcoder", **changes) if changes else catalog


def scenario_request(spec: ScenarioSpec) -> SliceRequest:
    common = dict(
        bandwidth=spec.stream_bps,
        latency_bound=spec.latency_bound_s,
        max_attendees=len(spec.attendees),
        attendees=spec.attendees,
        source=SOURCE,
    )
    if spec.name == "ec1":
        return SliceRequest(**common, edge_server="edge1", pinned_paths=_PINNED["ec1"])
    if spec.name == "ec2":
        return SliceRequest(**common, edge_server="edge2")
    if spec.name == "hosts":
        return SliceRequest(**common)
    if spec.name == "inc_audience":
        return SliceRequest(**common, inc_enabled=True, inc_function="transcoder",
                            placement=NearAudience())
    return SliceRequest(**common, inc_enabled=True, inc_function="transcoder",
                        placement=NearSource())


def check_routes(name: str, record: SliceRecord, t: Topology) -> None:
    """Compare embedded paths against the published routes for ``name``."""
    expected = PUBLISHED_ROUTES[name]
    problems = []
    for dst, route in expected.items():
        if dst not in record.paths:
            if dst in record.request.attendees or dst == record.request.edge_server:
                problems.append(f"{dst}: no embedded path")
            continue
        got = tuple(n for n in record.paths[dst] if t.is_switch(n))
        if got != route:
            problems.append(f"{dst}: embedded {'-'.join(got)}, published {'-'.join(route)}")
    if name in PUBLISHED_PLACEMENTS:
        got = {n for n, _ in record.placements}
        if got != PUBLISHED_PLACEMENTS[name]:
            problems.append(f"placements {sorted(got)} != {sorted(PUBLISHED_PLACEMENTS[name])}")
    if problems:
        raise RouteMismatchError(f"scenario {name}: " + "; ".join(problems))


def provision(spec: ScenarioSpec, catalog: Optional[Catalog] = None) -> ScenarioSetup:
    """Build the topology, create the scenario's slice through the engine and
    derive the stream that will run over it."""
    topo = load_topology(FsPath(spec.topology) if spec.topology else FIG3_TOPOLOGY)
    network = NetworkState(topo)
    backend = BACKENDS[spec.backend](network)
    cat = scenario_catalog(spec, catalog)
    engine = SliceEngine(topo, backend, cat, spec.step_costs, mtu=spec.mtu)
    record = engine.create_slice(scenario_request(spec))
    if spec.topology is None and tuple(spec.attendees) == HOSTS:
        check_routes(spec.name, record, topo)

    edge = record.request.edge_server
    edge_functions = {edge: cat.entries["transcoder"].spec} if edge else {}
    flow = FlowSpec.at_fps(
        "hologram", SOURCE, spec.attendees, spec.frames, spec.frame_size, spec.fps,
        mtu=spec.mtu, tag=record.tag, relay=edge,
    )
    return ScenarioSetup(spec, topo, network, engine, record, flow, edge_functions)


def simulate(spec: ScenarioSpec, catalog: Optional[Catalog] = None) -> tuple[ScenarioSetup, SimResult]:
    setup = provision(spec, catalog)
    result = run(setup.topology, setup.network.switches, [setup.flow],
                 edge_functions=setup.edge_functions)
    setup.network.record_run(result.link_bytes, result.report.span_s)
    report = result.report
    report.scenario = spec.name
    report.workload = {**setup.flow.workload(), "ratio": setup.engine.catalog.entries["transcoder"].spec.ratio}
    report.extra = {
        "slice": setup.record.to_dict(),
        "creation_time_s": setup.record.creation_time,
        "backend": spec.backend,
        "host_side_transcoding": spec.name == "hosts",
    }
    return setup, result


def run_scenario(spec: ScenarioSpec, out_dir=None, write_trace: bool = True) -> MetricsReport:
    """Provision, simulate and report one scenario.

    With ``out_dir`` the report is written to ``<name>.json`` and the packet
    trace to ``<name>.csv``. In the ``hosts`` scenario transcoding happens at
    the receivers after delivery, so it adds nothing to network latency.
    """
    _, result = simulate(spec)
    if out_dir is not None:
        out = FsPath(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.report.write(out / f"{spec.name}.json")
        if write_trace:
            write_trace_csv(result.trace, out / f"{spec.name}.csv")
    return result.report


# -- comparison ------------------------------------------------------------


def _workload_key(r: MetricsReport) -> str:
    return json.dumps(r.workload, sort_keys=True)


@dataclass
class ComparisonReport:
    scenarios: list[str]
    baseline: str
    avg_latency: dict[str, dict[str, float]]
    jitter: dict[str, dict[str, Optional[float]]]
    network_load: dict[str, float]
    load_ratio: dict[str, Optional[float]]
    latency_ratio: dict[str, dict[str, Optional[float]]]
    latency_order: dict[str, list[list[str]]]
    jitter_ok: dict[str, bool]
    checks: dict[str, bool] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": "holoslice.comparison/1",
            "scenarios": self.scenarios,
            "baseline": self.baseline,
            "avg_latency_s": self.avg_latency,
            "jitter_s": self.jitter,
            "network_load": self.network_load,
            "load_ratio_vs_baseline": self.load_ratio,
            "latency_ratio_vs_baseline": self.latency_ratio,
            "latency_order": self.latency_order,
            "jitter_below_15ms": self.jitter_ok,
            "checks": self.checks,
        }

    def to_text(self) -> str:
        hosts = sorted({h for lat in self.avg_latency.values() for h in lat})
        width = max(len(s) for s in self.scenarios) + 2
        lines = ["average latency (ms)".ljust(width) + "".join(h.rjust(10) for h in hosts)]
        for s in self.scenarios:
            lines.append(s.ljust(width) + "".join(
                f"{self.avg_latency[s].get(h, float('nan')) * 1e3:10.3f}" for h in hosts))
        lines.append("")
        lines.append("jitter (ms)".ljust(width) + "".join(h.rjust(10) for h in hosts))
        for s in self.scenarios:
            vals = [self.jitter[s].get(h) for h in hosts]
            lines.append(s.ljust(width) + "".join(
                f"{v * 1e3:10.3f}" if v is not None else "       n/a" for v in vals))
        lines.append("")
        lines.append("network load".ljust(width) + "      load  vs " + self.baseline)
        for s in self.scenarios:
            ratio = self.load_ratio[s]
            lines.append(s.ljust(width) + f"{self.network_load[s]:10.4f}"
                         + (f"{ratio:10.4f}" if ratio is not None else "       n/a"))
        if self.checks:
            lines.append("")
            for name, ok in self.checks.items():
                lines.append(f"[{'PASS' if ok else 'FAIL'}] {name}")
        return "\n".join(lines)


def _ratio(a: float, b: float) -> Optional[float]:
    return a / b if b else None


def compare(reports: Sequence[MetricsReport], baseline: Optional[str] = None) -> ComparisonReport:
    """Orderings, ratios against a baseline, and jitter-bound verdicts.

    All reports must describe the same workload. The baseline defaults to
    ``ec1`` when present, else the first report.
    """
    if len(reports) < 2:
        raise ConfigError("comparison needs at least two reports")
    keys = {_workload_key(r) for r in reports}
    if len(keys) != 1:
        raise WorkloadMismatchError("reports were produced with different workloads")
    names = []
    for i, r in enumerate(reports):
        name = r.scenario or f"report{i}"
        while name in names:
            name += "'"
        names.append(name)
    by_name: Mapping[str, MetricsReport] = dict(zip(names, reports))
    if baseline is None:
        baseline = "ec1" if "ec1" in by_name else names[0]
    if baseline not in by_name:
        raise ConfigError(f"baseline {baseline!r} not among the reports")
    base = by_name[baseline]

    lat = {n: dict(r.avg_latency) for n, r in by_name.items()}
    jit = {n: dict(r.jitter) for n, r in by_name.items()}
    load = {n: r.network_load for n, r in by_name.items()}
    hosts = sorted({h for v in lat.values() for h in v})
    order = {}
    for h in hosts:
        vals = sorted({lat[n][h] for n in names if h in lat[n]})
        order[h] = [[n for n in names if lat[n].get(h) == v] for v in vals]
    comp = ComparisonReport(
        scenarios=names,
        baseline=baseline,
        avg_latency=lat,
        jitter=jit,
        network_load=load,
        load_ratio={n: _ratio(load[n], base.network_load) for n in names},
        latency_ratio={n: {h: _ratio(lat[n][h], base.avg_latency[h]) for h in lat[n]
                           if h in base.avg_latency} for n in names},
        latency_order=order,
        jitter_ok={n: all(v is not None and v < JITTER_BOUND_S for v in jit[n].values()) for n in names},
    )
    if set(SCENARIOS) <= set(names):
        comp.checks = published_checks(by_name)
    return comp


def published_checks(r: Mapping[str, MetricsReport]) -> dict[str, bool]:
    """The qualitative results the five scenarios are expected to reproduce."""
    hosts = sorted(r["ec1"].avg_latency)
    lat = {n: r[n].avg_latency for n in SCENARIOS}
    others = [n for n in SCENARIOS if n != "ec1"]
    checks = {
        "ec1 has the highest latency for every host":
            all(lat["ec1"][h] > lat[n][h] for h in hosts for n in others),
        "hosts beats ec1 for every host": all(lat["hosts"][h] < lat["ec1"][h] for h in hosts),
        "inc_source <= ec2 for every host": all(lat["inc_source"][h] <= lat["ec2"][h] for h in hosts),
        "inc_source load < 50% of ec1":
            r["ec1"].network_load > 0 and r["inc_source"].network_load / r["ec1"].network_load < 0.5,
        "jitter < 15 ms in all scenarios":
            all(v is not None and v < JITTER_BOUND_S for n in SCENARIOS for v in r[n].jitter.values()),
    }
    for a, b in (("host1", "host2"), ("host3", "host4")):
        if a in hosts and b in hosts:
            checks[f"{b} latency >= {a} in every scenario"] = all(lat[n][b] >= lat[n][a] for n in SCENARIOS)
    return checks
