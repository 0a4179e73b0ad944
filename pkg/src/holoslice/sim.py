"""Deterministic packet-level discrete-event simulation and stream metrics.

Time is kept in integer nanoseconds throughout so that repeated runs are
bit-identical and per-hop latency sums can be checked exactly.
Serialization of ``size`` bytes on a channel of ``capacity`` bit/s takes
``ceil(size * 8 * 1e9 / capacity)`` ns.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
import math
from collections import Counter, deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path as FsPath
from typing import NamedTuple, Optional

from .dataplane import TAG_BASE, ExternSpec, Packet, SwitchState
from .errors import ConfigError, MetricsError
from .topology import Channel, EdgeServer, NodeId, Topology, shortest_path

NS = 1_000_000_000
TRACE_SCHEMA = "holoslice.trace/1"
METRICS_SCHEMA = "holoslice.metrics/1"
TRACE_COLUMNS = ["stream_id", "dst", "seq", "sent_at_us", "received_at_us", "bytes"]


def serialization_ns(size: int, capacity_bps: int) -> int:
    return -(-size * 8 * NS // capacity_bps)


@dataclass(frozen=True)
class FlowSpec:
    """One holographic stream replicated to an ordered list of destinations.

    With ``relay`` set, every copy is first addressed to that edge server,
    which transcodes it and re-sends it to the final destination.
    """

    stream_id: str
    source: NodeId
    destinations: tuple[NodeId, ...]
    frame_count: int
    frame_size: int
    frame_interval_ns: int
    mtu: int = 1500
    tag: int = TAG_BASE
    relay: Optional[NodeId] = None
    start_ns: int = 0

    def __post_init__(self):
        object.__setattr__(self, "destinations", tuple(self.destinations))
        if not self.destinations:
            raise ConfigError(f"flow {self.stream_id!r}: no destinations")
        if len(set(self.destinations)) != len(self.destinations):
            raise ConfigError(f"flow {self.stream_id!r}: duplicate destinations")
        if self.frame_count < 1 or self.frame_size < 1:
            raise ConfigError(f"flow {self.stream_id!r}: frame_count and frame_size must be >= 1")
        if self.mtu < 64:
            raise ConfigError(f"flow {self.stream_id!r}: mtu must be >= 64")
        if self.frame_interval_ns < 0 or self.start_ns < 0:
            raise ConfigError(f"flow {self.stream_id!r}: negative timing")

    @classmethod
    def at_fps(cls, stream_id, source, destinations, frame_count, frame_size, fps, **kw) -> FlowSpec:
        return cls(stream_id, source, tuple(destinations), frame_count, frame_size,
                   int(round(NS / fps)), **kw)

    @property
    def packets_per_frame(self) -> int:
        return -(-self.frame_size // self.mtu)

    @property
    def offered_bps(self) -> float:
        """Per-destination offered rate."""
        return self.frame_size * 8 * NS / self.frame_interval_ns if self.frame_interval_ns else math.inf

    def workload(self) -> dict:
        return {
            "frames": self.frame_count,
            "frame_size": self.frame_size,
            "frame_interval_ns": self.frame_interval_ns,
            "mtu": self.mtu,
            "destinations": list(self.destinations),
        }


def packetize(f: FlowSpec) -> list[list[Packet]]:
    """Split every frame into MTU-sized packets, one copy per destination.

    Within a frame, copy ``k`` for every destination (in list order) precedes
    copy ``k + 1`` for any destination.
    """
    n = f.packets_per_frame
    sizes = [f.mtu] * (n - 1) + [f.frame_size - f.mtu * (n - 1)]
    frames = []
    for i in range(f.frame_count):
        t = f.start_ns + i * f.frame_interval_ns
        frame = []
        for k, size in enumerate(sizes):
            for d in f.destinations:
                if f.relay is None:
                    frame.append(Packet(f.tag, f.stream_id, i * n + k, size, t, d))
                else:
                    frame.append(Packet(f.tag, f.stream_id, i * n + k, size, t, f.relay, relay_to=d))
        frames.append(frame)
    return frames


class HopTiming(NamedTuple):
    src: NodeId
    dst: NodeId
    size: int
    enqueued: int
    started: int
    finished: int
    arrived: int

    @property
    def channel(self) -> Channel:
        return (self.src, self.dst)

    @property
    def wait(self) -> int:
        return self.started - self.enqueued


@dataclass(frozen=True)
class PacketRecord:
    stream_id: str
    dst: NodeId
    seq: int
    tag: int
    sent_at_ns: int
    received_at_ns: int
    bytes: int
    hops: tuple[HopTiming, ...] = field(repr=False, compare=True)

    @property
    def latency_ns(self) -> int:
        return self.received_at_ns - self.sent_at_ns

    def link_bytes(self) -> dict[Channel, int]:
        out: dict[Channel, int] = {}
        for h in self.hops:
            out[h.channel] = out.get(h.channel, 0) + h.size
        return out


# -- metrics ---------------------------------------------------------------


def _for_dst(trace: Iterable[PacketRecord], dst: NodeId) -> list[PacketRecord]:
    return [r for r in trace if r.dst == dst]


def avg_latency(trace: Iterable[PacketRecord], dst: NodeId) -> float:
    """Mean end-to-end latency in seconds of the packets delivered to ``dst``."""
    recs = _for_dst(trace, dst)
    if not recs:
        raise MetricsError(f"no packets delivered to {dst!r}")
    return sum(r.latency_ns for r in recs) / len(recs) / NS


def jitter(trace: Iterable[PacketRecord], dst: NodeId) -> float:
    """Mean absolute latency difference between consecutive packets (by seq), seconds."""
    recs = sorted(_for_dst(trace, dst), key=lambda r: (r.stream_id, r.seq))
    diffs = [
        abs(b.latency_ns - a.latency_ns)
        for a, b in zip(recs, recs[1:])
        if a.stream_id == b.stream_id
    ]
    if not diffs:
        raise MetricsError(f"jitter for {dst!r} needs at least two packets of one stream")
    return sum(diffs) / len(diffs) / NS


def link_bytes_from_trace(trace: Iterable[PacketRecord]) -> dict[Channel, int]:
    totals: Counter = Counter()
    for r in trace:
        for h in r.hops:
            totals[h.channel] += h.size
    return dict(totals)


def network_load(link_bytes: Mapping[Channel, int], topology: Topology, span_s: float) -> float:
    """Mean used bandwidth per fabric channel over mean capacity per fabric channel.

    Only switch-to-switch channels count; host and server attachments do not.
    """
    if span_s <= 0:
        raise MetricsError("network load needs a positive span")
    chans = topology.fabric_channels()
    if not chans:
        return 0.0
    used = sum(link_bytes.get(ch, 0) * 8 / span_s for ch in chans) / len(chans)
    cap = sum(topology.capacity(ch) for ch in chans) / len(chans)
    return used / cap


@dataclass
class MetricsReport:
    avg_latency: dict[NodeId, float]
    jitter: dict[NodeId, Optional[float]]
    delivered: dict[NodeId, int]
    network_load: float
    injected: int
    dropped: int
    span_s: float
    link_bytes: dict[str, int]
    workload: dict = field(default_factory=dict)
    scenario: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": METRICS_SCHEMA,
            "scenario": self.scenario,
            "workload": self.workload,
            "injected": self.injected,
            "dropped": self.dropped,
            "span_s": self.span_s,
            "network_load": self.network_load,
            "hosts": {
                d: {
                    "avg_latency_s": self.avg_latency[d],
                    "jitter_s": self.jitter[d],
                    "delivered": self.delivered[d],
                }
                for d in self.avg_latency
            },
            "link_bytes": dict(self.link_bytes),
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> MetricsReport:
        if doc.get("schema") != METRICS_SCHEMA:
            raise ConfigError(f"unsupported metrics schema {doc.get('schema')!r}")
        hosts = doc["hosts"]
        return cls(
            avg_latency={d: h["avg_latency_s"] for d, h in hosts.items()},
            jitter={d: h["jitter_s"] for d, h in hosts.items()},
            delivered={d: h["delivered"] for d, h in hosts.items()},
            network_load=doc["network_load"],
            injected=doc["injected"],
            dropped=doc["dropped"],
            span_s=doc["span_s"],
            link_bytes=dict(doc["link_bytes"]),
            workload=dict(doc.get("workload") or {}),
            scenario=doc.get("scenario"),
            extra=dict(doc.get("extra") or {}),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, path) -> None:
        FsPath(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path) -> MetricsReport:
        return cls.from_dict(json.loads(FsPath(path).read_text(encoding="utf-8")))


def _us(ns: int) -> str:
    whole, frac = divmod(ns, 1000)
    return f"{whole}.{frac:03d}"


def trace_to_csv(trace: Iterable[PacketRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for r in trace:
        w.writerow([r.stream_id, r.dst, r.seq, _us(r.sent_at_ns), _us(r.received_at_ns), r.bytes])
    return buf.getvalue()


def write_trace_csv(trace: Iterable[PacketRecord], path) -> None:
    FsPath(path).write_text(trace_to_csv(trace), encoding="utf-8")


# -- engine ----------------------------------------------------------------


@dataclass
class SimResult:
    trace: list[PacketRecord]
    report: MetricsReport
    link_bytes: dict[Channel, int]
    injected_by_tag: Counter
    delivered_by_tag: Counter
    dropped_by_tag: Counter
    first_injection_ns: Optional[int]
    last_delivery_ns: Optional[int]


_INJECT, _TX_DONE, _ARRIVE, _ENQUEUE = range(4)


class _Channel:
    __slots__ = ("src", "dst", "capacity", "prop", "queue", "busy")

    def __init__(self, src, dst, capacity, prop):
        self.src, self.dst, self.capacity, self.prop = src, dst, capacity, prop
        self.queue: deque = deque()
        self.busy = None


class Simulator:
    """Single-run event loop. Use :func:`run` unless you need the internals."""

    def __init__(
        self,
        topology: Topology,
        switches: Mapping[NodeId, SwitchState],
        flows: Sequence[FlowSpec],
        duration_limit: Optional[float] = None,
        edge_functions: Optional[Mapping[NodeId, ExternSpec]] = None,
    ):
        self.topology = topology
        self.switches = switches
        self.flows = list(flows)
        self.limit_ns = None if duration_limit is None else int(round(duration_limit * NS))
        self.edge_functions = dict(edge_functions or {})
        for f in self.flows:
            for n in (f.source, *f.destinations, *([f.relay] if f.relay else [])):
                if n not in topology.nodes:
                    raise ConfigError(f"flow {f.stream_id!r} references unknown node {n!r}")
            if f.relay is not None and not isinstance(topology.nodes[f.relay], EdgeServer):
                raise ConfigError(f"flow {f.stream_id!r}: relay {f.relay!r} is not an edge server")
        self.channels = {
            ch: _Channel(*ch, topology.capacity(ch), topology.link(*ch).prop_delay_ns)
            for ch in topology.channels()
        }
        self._routes: dict[tuple[NodeId, NodeId], Optional[NodeId]] = {}
        self._heap: list = []
        self._n = 0

    def _push(self, t, kind, a, b=None, c=None):
        self._n += 1
        heapq.heappush(self._heap, (t, self._n, kind, a, b, c))

    def _host_next_hop(self, node: NodeId, dst: NodeId) -> Optional[NodeId]:
        key = (node, dst)
        if key not in self._routes:
            try:
                path = shortest_path(self.topology, node, dst)
                self._routes[key] = path[1] if len(path) > 1 else None
            except Exception:
                self._routes[key] = None
        return self._routes[key]

    def run(self) -> SimResult:
        injected, delivered, dropped = Counter(), Counter(), Counter()
        link_bytes: Counter = Counter()
        trace: list[PacketRecord] = []
        frames = [packetize(f) for f in self.flows]
        for fi, f in enumerate(self.flows):
            for i in range(f.frame_count):
                self._push(f.start_ns + i * f.frame_interval_ns, _INJECT, fi, i)

        heap, channels, switches = self._heap, self.channels, self.switches
        nodes = self.topology.nodes
        first_inj = last_del = None

        def enqueue(t, u, v, pkt):
            ch = channels.get((u, v))
            if ch is None:
                dropped[pkt.tag] += 1
                return False
            ch.queue.append((pkt, t))
            if ch.busy is None:
                start(ch, t)
            return True

        def start(ch, t):
            pkt, enq = ch.queue.popleft()
            ch.busy = (pkt, enq, t)
            self._push(t + serialization_ns(pkt.size, ch.capacity), _TX_DONE, ch)

        while heap:
            t, _, kind, a, b, c = heapq.heappop(heap)
            if self.limit_ns is not None and t > self.limit_ns:
                heapq.heappush(heap, (t, _, kind, a, b, c))
                break

            if kind == _TX_DONE:
                ch = a
                pkt, enq, started = ch.busy
                ch.busy = None
                link_bytes[(ch.src, ch.dst)] += pkt.size
                self._push(t + ch.prop, _ARRIVE, ch.dst, pkt, (ch.src, enq, started, t))
                if ch.queue:
                    start(ch, t)

            elif kind == _ARRIVE:
                node, pkt = a, b
                src, enq, started, finished = c
                pkt.hops.append(HopTiming(src, node, pkt.size, enq, started, finished, t))
                pkt.provenance.append((node, t))
                if node == pkt.dst:
                    if pkt.relay_to is None:
                        delivered[pkt.tag] += 1
                        last_del = t if last_del is None else max(last_del, t)
                        trace.append(PacketRecord(
                            pkt.stream_id, node, pkt.seq, pkt.tag, pkt.created_at, t,
                            pkt.size, tuple(pkt.hops),
                        ))
                        continue
                    kind_ = nodes[node]
                    spec = self.edge_functions.get(node)
                    delay = kind_.proc_delay_ns if isinstance(kind_, EdgeServer) else 0
                    size = pkt.size
                    if spec is not None:
                        delay += spec.per_packet_delay_ns
                        size = spec.scaled_size(size)
                    out = replace(pkt, dst=pkt.relay_to, relay_to=None, size=size)
                    nxt = self._host_next_hop(node, out.dst)
                    if nxt is None:
                        dropped[pkt.tag] += 1
                    else:
                        self._push(t + delay, _ENQUEUE, node, nxt, out)
                    continue
                sw = switches.get(node)
                outs = sw.process(pkt) if sw is not None else []
                if not outs:
                    dropped[pkt.tag] += 1
                    continue
                for out, nxt, extra in outs:
                    if extra:
                        self._push(t + extra, _ENQUEUE, node, nxt, out)
                    else:
                        enqueue(t, node, nxt, out)

            elif kind == _ENQUEUE:
                enqueue(t, a, b, c)

            else:  # _INJECT
                f = self.flows[a]
                first_inj = t if first_inj is None else min(first_inj, t)
                for pkt in frames[a][b]:
                    injected[pkt.tag] += 1
                    pkt.provenance.append((f.source, t))
                    nxt = self._host_next_hop(f.source, pkt.dst)
                    if nxt is None:
                        dropped[pkt.tag] += 1
                    else:
                        enqueue(t, f.source, nxt, pkt)
                frames[a][b] = None

        if heap:
            # the duration limit cut the run short: whatever is still in flight
            # or not yet injected counts as dropped
            for _t, _s, kind, a, b, c in heap:
                if kind == _INJECT:
                    f = self.flows[a]
                    injected[f.tag] += f.packets_per_frame * len(f.destinations)
            for tag in injected:
                dropped[tag] += injected[tag] - delivered[tag] - dropped[tag]
            heap.clear()

        report = build_report(
            trace, self.topology, dict(link_bytes),
            injected=sum(injected.values()), dropped=sum(dropped.values()),
            first_injection_ns=first_inj, last_delivery_ns=last_del,
            workload=self.flows[0].workload() if len(self.flows) == 1 else
            {f.stream_id: f.workload() for f in self.flows},
        )
        return SimResult(trace, report, dict(link_bytes), injected, delivered, dropped,
                         first_inj, last_del)


def build_report(
    trace: Sequence[PacketRecord],
    topology: Topology,
    link_bytes: Mapping[Channel, int],
    *,
    injected: int,
    dropped: int,
    first_injection_ns: Optional[int],
    last_delivery_ns: Optional[int],
    workload: Optional[dict] = None,
    scenario: Optional[str] = None,
) -> MetricsReport:
    dsts = sorted({r.dst for r in trace})
    lat, jit, count = {}, {}, {}
    for d in dsts:
        recs = _for_dst(trace, d)
        lat[d] = avg_latency(recs, d)
        count[d] = len(recs)
        try:
            jit[d] = jitter(recs, d)
        except MetricsError:
            jit[d] = None
    if first_injection_ns is not None and last_delivery_ns is not None and last_delivery_ns > first_injection_ns:
        span_s = (last_delivery_ns - first_injection_ns) / NS
        load = network_load(link_bytes, topology, span_s)
    else:
        span_s, load = 0.0, 0.0
    return MetricsReport(
        avg_latency=lat,
        jitter=jit,
        delivered=count,
        network_load=load,
        injected=injected,
        dropped=dropped,
        span_s=span_s,
        link_bytes={f"{u}->{v}": n for (u, v), n in sorted(link_bytes.items())},
        workload=workload or {},
        scenario=scenario,
    )


def run(
    topology: Topology,
    switches: Mapping[NodeId, SwitchState],
    flows: Sequence[FlowSpec],
    duration_limit: Optional[float] = None,
    edge_functions: Optional[Mapping[NodeId, ExternSpec]] = None,
) -> SimResult:
    """Simulate ``flows`` over the network until every packet is delivered or dropped.

    ``duration_limit`` (seconds) truncates the run; packets still in flight at
    that point are counted as dropped. ``edge_functions`` maps edge servers to
    the function they apply to relayed packets, on top of their own
    processing delay.
    """
    return Simulator(topology, switches, flows, duration_limit, edge_functions).run()
