"""Physical infrastructure graph: nodes, duplex links, routing and capacity queries."""

from __future__ import annotations

import math
from collections import defaultdict, deque
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Union

import yaml

from .errors import ConfigError, InfeasibleError, NoPathError

NodeId = str
Channel = tuple[NodeId, NodeId]  # directed (from, to)
Path = tuple[NodeId, ...]

DEFAULT_PROP_DELAY_MS = 0.5
DEFAULT_PIPELINE_DELAY_MS = 0.01
DEFAULT_SWITCH_CPU = 100.0


@dataclass(frozen=True)
class ProgrammableSwitch:
    cpu_capacity: float = DEFAULT_SWITCH_CPU
    pipeline_delay_ns: int = int(DEFAULT_PIPELINE_DELAY_MS * 1_000_000)


@dataclass(frozen=True)
class Host:
    pass


@dataclass(frozen=True)
class EdgeServer:
    proc_delay_ns: int = 0


@dataclass(frozen=True)
class StreamingServer:
    pass


NodeKind = Union[ProgrammableSwitch, Host, EdgeServer, StreamingServer]


@dataclass(frozen=True)
class Link:
    a: NodeId
    b: NodeId
    capacity_bps: int
    prop_delay_ns: int

    def channels(self) -> tuple[Channel, Channel]:
        return (self.a, self.b), (self.b, self.a)


def ms_to_ns(value: float) -> int:
    return int(round(value * 1_000_000))


class Topology:
    """Immutable node/link graph.

    Each configured link becomes two independent directed channels, each at
    the full link capacity.
    """

    def __init__(self, nodes: Mapping[NodeId, NodeKind], links: Iterable[Link]):
        self.nodes: dict[NodeId, NodeKind] = dict(nodes)
        self.links: tuple[Link, ...] = tuple(links)
        self._channels: dict[Channel, Link] = {}
        adj: dict[NodeId, set[NodeId]] = defaultdict(set)
        for link in self.links:
            for end in (link.a, link.b):
                if end not in self.nodes:
                    raise ConfigError(f"link {link.a}-{link.b}: undeclared node {end!r}")
            if link.a == link.b:
                raise ConfigError(f"self-loop link on {link.a!r}")
            if link.capacity_bps <= 0:
                raise ConfigError(f"link {link.a}-{link.b}: capacity must be positive")
            if link.prop_delay_ns < 0:
                raise ConfigError(f"link {link.a}-{link.b}: negative propagation delay")
            for ch in link.channels():
                if ch in self._channels:
                    raise ConfigError(f"duplicate link {link.a}-{link.b}")
                self._channels[ch] = link
            adj[link.a].add(link.b)
            adj[link.b].add(link.a)
        self._adj: dict[NodeId, tuple[NodeId, ...]] = {
            n: tuple(sorted(adj.get(n, ()))) for n in self.nodes
        }

    def __repr__(self) -> str:
        return f"Topology({len(self.nodes)} nodes, {len(self.links)} links)"

    def neighbors(self, node: NodeId) -> tuple[NodeId, ...]:
        return self._adj[node]

    def channels(self) -> list[Channel]:
        return sorted(self._channels)

    def has_channel(self, ch: Channel) -> bool:
        return ch in self._channels

    def link(self, u: NodeId, v: NodeId) -> Link:
        try:
            return self._channels[(u, v)]
        except KeyError:
            raise NoPathError(f"{u!r} and {v!r} are not adjacent") from None

    def capacity(self, ch: Channel) -> int:
        return self.link(*ch).capacity_bps

    def is_switch(self, node: NodeId) -> bool:
        return isinstance(self.nodes.get(node), ProgrammableSwitch)

    def nodes_of(self, kind: type) -> list[NodeId]:
        return sorted(n for n, k in self.nodes.items() if isinstance(k, kind))

    def fabric_channels(self) -> list[Channel]:
        """Switch-to-switch channels; host and server attachments excluded."""
        return [ch for ch in self.channels() if self.is_switch(ch[0]) and self.is_switch(ch[1])]

    def validate_path(self, path: Iterable[NodeId]) -> Path:
        path = tuple(path)
        if not path:
            raise ConfigError("empty path")
        if len(set(path)) != len(path):
            raise ConfigError(f"path revisits a node: {'-'.join(path)}")
        for n in path:
            if n not in self.nodes:
                raise ConfigError(f"path references unknown node {n!r}")
        for u, v in zip(path, path[1:]):
            if (u, v) not in self._channels:
                raise ConfigError(f"path hops {u!r}->{v!r} are not adjacent")
        return path


def path_channels(path: Path) -> list[Channel]:
    return list(zip(path, path[1:]))


def _node_kind(entry: dict) -> NodeKind:
    kind = str(entry.get("kind", "")).lower()
    if kind in ("switch", "programmable_switch"):
        cpu = float(entry.get("cpu_capacity", DEFAULT_SWITCH_CPU))
        if cpu <= 0:
            raise ConfigError(f"node {entry['id']!r}: cpu_capacity must be positive")
        pipeline = ms_to_ns(float(entry.get("pipeline_delay_ms", DEFAULT_PIPELINE_DELAY_MS)))
        if pipeline < 0:
            raise ConfigError(f"node {entry['id']!r}: negative pipeline delay")
        return ProgrammableSwitch(cpu_capacity=cpu, pipeline_delay_ns=pipeline)
    if kind == "host":
        return Host()
    if kind in ("edge", "edge_server"):
        delay = ms_to_ns(float(entry.get("proc_delay_ms", 0.0)))
        if delay < 0:
            raise ConfigError(f"node {entry['id']!r}: negative proc delay")
        return EdgeServer(proc_delay_ns=delay)
    if kind in ("streaming_server", "streamer"):
        return StreamingServer()
    raise ConfigError(f"node {entry.get('id')!r}: unknown kind {kind!r}")


def load_topology(config: Union[str, bytes, FsPath, Mapping]) -> Topology:
    """Build a :class:`Topology` from a YAML/JSON document, a path, or a parsed mapping.

    Raises :class:`ConfigError` on parse errors, duplicate node ids, dangling
    link endpoints and nonpositive capacities.
    """
    if isinstance(config, FsPath):
        config = config.read_text(encoding="utf-8")
    if isinstance(config, (str, bytes)):
        try:
            doc = yaml.safe_load(config)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse topology document: {exc}") from exc
    else:
        doc = config
    if not isinstance(doc, Mapping):
        raise ConfigError("topology document must be a mapping with 'nodes' and 'links'")

    nodes: dict[NodeId, NodeKind] = {}
    for entry in doc.get("nodes") or []:
        if not isinstance(entry, Mapping) or not entry.get("id"):
            raise ConfigError(f"node entry without id: {entry!r}")
        nid = str(entry["id"])
        if nid in nodes:
            raise ConfigError(f"duplicate node id {nid!r}")
        nodes[nid] = _node_kind(dict(entry))

    links = []
    for entry in doc.get("links") or []:
        try:
            a, b = str(entry["a"]), str(entry["b"])
            cap = float(entry["capacity_mbps"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad link entry {entry!r}") from exc
        if cap <= 0:
            raise ConfigError(f"link {a}-{b}: capacity must be positive")
        prop = float(entry.get("prop_delay_ms", DEFAULT_PROP_DELAY_MS))
        links.append(Link(a, b, int(round(cap * 1_000_000)), ms_to_ns(prop)))
    return Topology(nodes, links)


def shortest_path(
    t: Topology,
    src: NodeId,
    dst: NodeId,
    allowed: Callable[[Channel], bool] | None = None,
) -> Path:
    """Minimum-hop simple path from ``src`` to ``dst``.

    Among equal-length paths the lexicographically smallest hop sequence wins.
    ``allowed`` optionally filters usable directed channels.
    """
    for n in (src, dst):
        if n not in t.nodes:
            raise NoPathError(f"unknown node {n!r}")
    if src == dst:
        return (src,)
    ok = allowed or (lambda ch: True)

    # distances to dst over reversed channels, then walk forward greedily
    dist = {dst: 0}
    queue = deque([dst])
    while queue:
        v = queue.popleft()
        for u in t.neighbors(v):
            if u not in dist and ok((u, v)):
                dist[u] = dist[v] + 1
                queue.append(u)
    if src not in dist:
        raise NoPathError(f"no path from {src!r} to {dst!r}")

    path = [src]
    node = src
    while node != dst:
        node = next(
            n for n in t.neighbors(node) if dist.get(n) == dist[node] - 1 and ok((node, n))
        )
        path.append(node)
    return tuple(path)


def residual_bandwidth(
    t: Topology, reservations: Iterable[tuple[Channel, float]]
) -> dict[Channel, float]:
    """Remaining capacity per directed channel after subtracting reservations.

    Over-reservation raises :class:`InfeasibleError` rather than clamping.
    """
    used: dict[Channel, list[float]] = defaultdict(list)
    for ch, bps in reservations:
        if not t.has_channel(ch):
            raise ConfigError(f"reservation on unknown channel {ch}")
        if bps < 0:
            raise ConfigError(f"negative reservation on {ch}")
        used[ch].append(bps)
    residual = {}
    for ch in t.channels():
        # fsum is exactly rounded, so the result does not depend on order
        left = t.capacity(ch) - math.fsum(used.get(ch, ()))
        if left < 0:
            raise InfeasibleError(
                f"channel {ch[0]}->{ch[1]} over-reserved by {-left:.0f} bit/s"
            )
        residual[ch] = left
    return residual
