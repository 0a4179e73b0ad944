"""Slice embedding service: request intake, embedding, INC program selection
and placement, rule installation through the adapter, and slice lifecycle.

Creation runs five steps, each with a simulated cost:

1. validate the request
2. collect statistics from the resource monitor
3. embed paths and reserve bandwidth (and install forwarding rules)
4. select the INC program from the catalog      -- INC-enabled slices only
5. place the INC program on switches            -- INC-enabled slices only
"""

from __future__ import annotations

import enum
import itertools
import math
import threading
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path as FsPath
from typing import Optional, Union

import yaml

from .dataplane import TAG_BASE, TAG_MAX, ExternSpec, Forward, TableEntry, TranscodeThenForward
from .errors import (
    ConfigError,
    HolosliceError,
    InfeasibleError,
    NoFeasiblePlacementError,
    NoPathError,
    UnknownProgramError,
    UnknownSliceError,
    ValidationError,
)
from .monitor import (
    AdapterBackend,
    Command,
    InstallEntry,
    InstallExtern,
    RemoveEntry,
    RemoveExtern,
    StatsSnapshot,
)
from .sim import NS, serialization_ns
from .topology import (
    Channel,
    EdgeServer,
    NodeId,
    Path,
    Topology,
    path_channels,
    shortest_path,
)

DATA_DIR = FsPath(__file__).parent / "data"

# -- catalog ---------------------------------------------------------------


@dataclass(frozen=True)
class IncCatalogEntry:
    name: str
    spec: ExternSpec


class Catalog:
    def __init__(self, entries: Sequence[IncCatalogEntry] = ()):
        self.entries: dict[str, IncCatalogEntry] = {}
        for e in entries:
            self.register(e)

    def register(self, entry: IncCatalogEntry) -> None:
        if entry.name in self.entries:
            raise ConfigError(f"INC program {entry.name!r} registered twice")
        self.entries[entry.name] = entry

    def __contains__(self, name) -> bool:
        return name in self.entries

    def __iter__(self):
        return iter(self.entries.values())

    def with_override(self, name: str, **changes) -> Catalog:
        """Copy of the catalog with fields of one program's spec replaced."""
        entries = []
        for e in self:
            if e.name == name:
                s = e.spec
                fields = {"name": s.name, "ratio": s.ratio,
                          "per_packet_delay_ns": s.per_packet_delay_ns, "cpu_cost": s.cpu_cost}
                fields.update(changes)
                e = IncCatalogEntry(name, ExternSpec(**fields))
            entries.append(e)
        return Catalog(entries)


def load_catalog(source: Union[str, FsPath, Mapping, None] = None) -> Catalog:
    """Load a catalog document (``programs: [{name, ratio, per_packet_delay_ms, cpu_cost}]``).

    With no argument the packaged default catalog is returned.
    """
    if source is None:
        source = DATA_DIR / "catalog.yaml"
    if isinstance(source, FsPath):
        source = source.read_text(encoding="utf-8")
    if isinstance(source, str):
        try:
            source = yaml.safe_load(source)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse catalog: {exc}") from exc
    if not isinstance(source, Mapping):
        raise ConfigError("catalog document must be a mapping with 'programs'")
    cat = Catalog()
    for p in source.get("programs") or []:
        try:
            spec = ExternSpec.from_ms(str(p["name"]), float(p["ratio"]),
                                      float(p.get("per_packet_delay_ms", 0.0)),
                                      float(p.get("cpu_cost", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad catalog entry {p!r}") from exc
        cat.register(IncCatalogEntry(spec.name, spec))
    return cat


def select_program(catalog: Catalog, name: str) -> IncCatalogEntry:
    try:
        return catalog.entries[name]
    except KeyError:
        raise UnknownProgramError(f"no INC program named {name!r} in the catalog") from None


# -- requests and records -------------------------------------------------


@dataclass(frozen=True)
class NearSource:
    name = "near_source"


@dataclass(frozen=True)
class NearAudience:
    name = "near_audience"


@dataclass(frozen=True)
class Explicit:
    nodes: tuple[NodeId, ...]
    name = "explicit"


@dataclass(frozen=True)
class GreedyMinLoad:
    name = "greedy_min_load"


PlacementStrategy = Union[NearSource, NearAudience, Explicit, GreedyMinLoad]


def placement_from_dict(doc) -> PlacementStrategy:
    if doc is None:
        return GreedyMinLoad()
    if isinstance(doc, str):
        doc = {"strategy": doc}
    name = doc.get("strategy")
    if name == "near_source":
        return NearSource()
    if name == "near_audience":
        return NearAudience()
    if name == "greedy_min_load":
        return GreedyMinLoad()
    if name == "explicit":
        nodes = doc.get("nodes")
        if not isinstance(nodes, list) or not nodes:
            raise ValidationError("explicit placement needs a non-empty 'nodes' list")
        return Explicit(tuple(str(n) for n in nodes))
    raise ValidationError(f"unknown placement strategy {name!r}")


def placement_to_dict(p: PlacementStrategy) -> dict:
    if isinstance(p, Explicit):
        return {"strategy": p.name, "nodes": list(p.nodes)}
    return {"strategy": p.name}


@dataclass(frozen=True)
class SliceRequest:
    """What an application provider asks for.

    ``bandwidth`` is the per-stream rate in bit/s. ``edge_server`` turns the
    slice into an edge-transcoding baseline: streams go to that server first
    and leave it towards the attendees. ``pinned_paths`` fixes the route to a
    given destination (attendee or edge server) instead of computing it.
    """

    bandwidth: float
    latency_bound: float
    max_attendees: int
    attendees: tuple[NodeId, ...]
    source: NodeId
    inc_enabled: bool = False
    inc_function: Optional[str] = None
    placement: PlacementStrategy = field(default_factory=GreedyMinLoad)
    edge_server: Optional[NodeId] = None
    pinned_paths: Mapping[NodeId, Path] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "attendees", tuple(self.attendees))
        object.__setattr__(self, "pinned_paths",
                           {k: tuple(v) for k, v in dict(self.pinned_paths).items()})
        if self.inc_enabled and self.inc_function is None:
            object.__setattr__(self, "inc_function", "transcoder")

    def validate(self, t: Topology) -> None:
        if not isinstance(self.bandwidth, (int, float)) or not self.bandwidth > 0:
            raise ValidationError("bandwidth must be positive")
        if not self.latency_bound > 0:
            raise ValidationError("latency_bound must be positive")
        if not self.attendees:
            raise ValidationError("attendee list is empty")
        if len(self.attendees) > self.max_attendees:
            raise ValidationError(
                f"{len(self.attendees)} attendees exceed max_attendees={self.max_attendees}"
            )
        if len(set(self.attendees)) != len(self.attendees):
            raise ValidationError("duplicate attendee locations")
        for n in (self.source, *self.attendees):
            if n not in t.nodes:
                raise ValidationError(f"unknown node {n!r}")
        if self.source in self.attendees:
            raise ValidationError("source cannot also be an attendee")
        if self.edge_server is not None:
            if not isinstance(t.nodes.get(self.edge_server), EdgeServer):
                raise ValidationError(f"{self.edge_server!r} is not an edge server")
            if self.inc_enabled:
                raise ValidationError("a slice transcodes either at an edge server or in-network, not both")
        if self.inc_enabled and isinstance(self.placement, Explicit):
            for n in self.placement.nodes:
                if not t.is_switch(n):
                    raise ValidationError(f"explicit placement node {n!r} is not a programmable switch")
        for dst in self.pinned_paths:
            if dst not in self.attendees and dst != self.edge_server:
                raise ValidationError(f"pinned path for {dst!r}, which is not a slice destination")

    def to_dict(self) -> dict:
        return {
            "bandwidth_bps": self.bandwidth,
            "latency_bound_s": self.latency_bound,
            "max_attendees": self.max_attendees,
            "attendees": list(self.attendees),
            "source": self.source,
            "inc_enabled": self.inc_enabled,
            "inc_function": self.inc_function,
            "placement": placement_to_dict(self.placement),
            "edge_server": self.edge_server,
            "pinned_paths": {k: list(v) for k, v in sorted(self.pinned_paths.items())},
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> SliceRequest:
        if not isinstance(doc, Mapping):
            raise ValidationError("slice request must be a JSON object")
        try:
            attendees = doc["attendees"]
            if not isinstance(attendees, list):
                raise ValidationError("'attendees' must be a list")
            pinned = doc.get("pinned_paths") or {}
            if not isinstance(pinned, Mapping):
                raise ValidationError("'pinned_paths' must be an object")
            return cls(
                bandwidth=_number(doc["bandwidth_bps"], "bandwidth_bps"),
                latency_bound=_number(doc.get("latency_bound_s", 1.0), "latency_bound_s"),
                max_attendees=int(doc.get("max_attendees", len(attendees))),
                attendees=tuple(str(a) for a in attendees),
                source=str(doc["source"]),
                inc_enabled=bool(doc.get("inc_enabled", False)),
                inc_function=doc.get("inc_function"),
                placement=placement_from_dict(doc.get("placement")),
                edge_server=doc.get("edge_server"),
                pinned_paths={str(k): tuple(map(str, v)) for k, v in pinned.items()},
            )
        except KeyError as exc:
            raise ValidationError(f"missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise ValidationError(str(exc)) from None


def _number(value, name) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{name!r} must be a number")
    return float(value)


class SliceState(str, enum.Enum):
    DESIGNED = "designed"
    ACTIVE = "active"
    DECOMMISSIONED = "decommissioned"


@dataclass(frozen=True)
class SliceRecord:
    slice_id: str
    tag: int
    request: SliceRequest
    paths: Mapping[NodeId, Path]
    reserved: tuple[tuple[Channel, float], ...]
    placements: tuple[tuple[NodeId, str], ...]
    transcode_at: Mapping[NodeId, NodeId]
    state: SliceState
    creation_steps: tuple[tuple[str, float], ...]
    installed: tuple[Command, ...] = field(default=(), repr=False)

    @property
    def creation_time(self) -> float:
        return math.fsum(c for _, c in self.creation_steps)

    def to_dict(self) -> dict:
        return {
            "slice_id": self.slice_id,
            "tag": self.tag,
            "ethertype": f"{self.tag:#06x}",
            "state": self.state.value,
            "request": self.request.to_dict(),
            "paths": {d: list(p) for d, p in self.paths.items()},
            "reserved": [{"channel": f"{u}->{v}", "bps": bps} for (u, v), bps in self.reserved],
            "placements": [{"node": n, "extern": ref} for n, ref in self.placements],
            "transcode_at": dict(self.transcode_at),
            "creation_steps": [{"step": s, "cost_s": c} for s, c in self.creation_steps],
            "creation_time_s": self.creation_time,
        }


@dataclass(frozen=True)
class StepCosts:
    """Simulated duration of each creation step, seconds. Adapter command
    latencies are added on top."""

    validate: float = 0.020
    collect_stats: float = 0.060
    embed: float = 0.100
    select_program: float = 0.020
    place: float = 0.045


# -- embedding and placement ---------------------------------------------


def _route_delay_ns(t: Topology, path: Path, mtu: int) -> int:
    return sum(serialization_ns(mtu, t.capacity(ch)) + t.link(*ch).prop_delay_ns
               for ch in path_channels(path))


def embed(
    req: SliceRequest,
    t: Topology,
    stats: StatsSnapshot,
    own: Sequence[tuple[Channel, float]] = (),
    mtu: int = 1500,
) -> tuple[dict[NodeId, Path], list[tuple[Channel, float]]]:
    """Greedy per-destination shortest path over channels with enough residual bandwidth.

    Residual bandwidth comes from the reservations reported in ``stats``;
    ``own`` lists reservations of the slice being re-embedded, which are
    treated as free. A channel shared by several of this slice's paths is
    reserved once.
    """
    residual = {ch: t.capacity(ch) - s.reserved_bps for ch, s in stats.link_stats.items()}
    for ch, bps in own:
        residual[ch] += bps
    taken: set[Channel] = set()

    def allowed(ch: Channel) -> bool:
        return ch in taken or residual.get(ch, 0.0) >= req.bandwidth

    def leg(src: NodeId, dst: NodeId) -> Path:
        def usable(ch: Channel) -> bool:
            # only switches (and the leg's own origin) forward traffic
            return (ch[0] == src or t.is_switch(ch[0])) and allowed(ch)

        if dst in req.pinned_paths:
            path = req.pinned_paths[dst]
            try:
                t.validate_path(path)
            except ConfigError as exc:
                raise ValidationError(f"pinned path to {dst!r}: {exc}") from None
            if path[0] != src or path[-1] != dst:
                raise ValidationError(f"pinned path to {dst!r} must run {src}..{dst}")
            for ch in path_channels(path):
                if not allowed(ch):
                    raise InfeasibleError(
                        f"pinned path to {dst!r}: {ch[0]}->{ch[1]} has {residual[ch]:.0f} bit/s left"
                    )
        else:
            try:
                path = shortest_path(t, src, dst, usable)
            except NoPathError:
                raise InfeasibleError(
                    f"no path {src}->{dst} with {req.bandwidth:.0f} bit/s residual bandwidth"
                ) from None
        taken.update(path_channels(path))
        return path

    paths: dict[NodeId, Path] = {}
    origin = req.source
    if req.edge_server is not None:
        paths[req.edge_server] = leg(req.source, req.edge_server)
        origin = req.edge_server
    for a in req.attendees:
        paths[a] = leg(origin, a)

    bound_ns = req.latency_bound * NS
    upstream = _route_delay_ns(t, paths[req.edge_server], mtu) if req.edge_server else 0
    for a in req.attendees:
        if upstream + _route_delay_ns(t, paths[a], mtu) > bound_ns:
            raise InfeasibleError(f"route to {a!r} cannot meet the {req.latency_bound * 1e3:g} ms bound")
    return paths, [(ch, float(req.bandwidth)) for ch in sorted(taken)]


def transcode_points(paths: Mapping[NodeId, Path], nodes: Sequence[NodeId]) -> dict[NodeId, NodeId]:
    """First placement node on each destination's path (at most one transcode per path)."""
    chosen = set(nodes)
    out = {}
    for dst, path in paths.items():
        for n in path:
            if n in chosen:
                out[dst] = n
                break
    return out


def static_route_bytes(paths: Mapping[NodeId, Path], points: Mapping[NodeId, NodeId], ratio) -> Fraction:
    """Bytes carried over all route channels per unit of original stream volume."""
    r = Fraction(repr(float(ratio)))
    total = Fraction(0)
    for dst, path in paths.items():
        point = points.get(dst)
        scaled = False
        for u, _v in path_channels(path):
            if u == point:
                scaled = True
            total += r if scaled else 1
    return total


def _loads(points: Mapping[NodeId, NodeId], pps_per_stream: float) -> dict[NodeId, float]:
    loads: dict[NodeId, float] = {}
    for node in points.values():
        loads[node] = loads.get(node, 0.0) + pps_per_stream
    return loads


def place_inc(
    strategy: PlacementStrategy,
    paths: Mapping[NodeId, Path],
    t: Topology,
    cpu_headroom: Mapping[NodeId, float],
    spec: ExternSpec,
    pps_per_stream: float,
) -> list[NodeId]:
    """Choose the switches that will host ``spec`` for this slice.

    ``cpu_headroom`` maps switches to their free CPU units; a switch can host
    the program only if ``spec.cpu_cost`` times the packet rate it would
    transcode fits.
    """

    def fits(nodes: Sequence[NodeId]) -> bool:
        loads = _loads(transcode_points(paths, nodes), pps_per_stream)
        return all(spec.cpu_cost * pps <= cpu_headroom.get(n, 0.0) for n, pps in loads.items())

    switch_paths = {d: [n for n in p if t.is_switch(n)] for d, p in paths.items()}

    if isinstance(strategy, NearSource):
        first = next(iter(switch_paths.values()))
        common = [n for n in first if all(n in sp for sp in switch_paths.values())]
        for n in common:
            if fits([n]):
                return [n]
        raise NoFeasiblePlacementError("no switch common to all paths has enough CPU headroom")

    if isinstance(strategy, NearAudience):
        nodes: list[NodeId] = []
        for sp in switch_paths.values():
            if sp and sp[-1] not in nodes:
                nodes.append(sp[-1])
        if not nodes or not fits(nodes):
            raise NoFeasiblePlacementError("switches next to the audience lack CPU headroom")
        return nodes

    if isinstance(strategy, Explicit):
        on_path = {n for sp in switch_paths.values() for n in sp}
        for n in strategy.nodes:
            if n not in on_path:
                raise NoFeasiblePlacementError(f"explicit node {n!r} is not on any slice path")
        if not fits(strategy.nodes):
            raise NoFeasiblePlacementError("explicit placement exceeds switch CPU headroom")
        return list(strategy.nodes)

    if isinstance(strategy, GreedyMinLoad):
        candidates = sorted({n for sp in switch_paths.values() for n in sp})
        best = None
        for n in candidates:
            if not fits([n]):
                continue
            cost = static_route_bytes(paths, transcode_points(paths, [n]), spec.ratio)
            if best is None or cost < best[0]:
                best = (cost, n)
        if best is None:
            raise NoFeasiblePlacementError("every on-path switch lacks CPU headroom")
        return [best[1]]

    raise ValidationError(f"unknown placement strategy {strategy!r}")


# -- engine ----------------------------------------------------------------


@dataclass
class _Plan:
    paths: dict[NodeId, Path]
    reserved: list[tuple[Channel, float]]
    placements: list[tuple[NodeId, str]]
    points: dict[NodeId, NodeId]
    commands: list[Command]


class SliceEngine:
    """Owns slice records and serializes every mutating call through one lock."""

    def __init__(
        self,
        topology: Topology,
        backend: AdapterBackend,
        catalog: Optional[Catalog] = None,
        step_costs: Optional[StepCosts] = None,
        mtu: int = 1500,
    ):
        self.topology = topology
        self.backend = backend
        self.catalog = catalog if catalog is not None else load_catalog()
        self.step_costs = step_costs or StepCosts()
        self.mtu = mtu
        self._slices: dict[str, SliceRecord] = {}
        self._ids = itertools.count(1)
        self._lock = threading.RLock()
        self._publish_reservations()

    # reads

    def get_slice(self, slice_id: str) -> SliceRecord:
        try:
            return self._slices[slice_id]
        except KeyError:
            raise UnknownSliceError(f"no slice {slice_id!r}") from None

    def list_slices(self) -> list[SliceRecord]:
        return list(self._slices.values())

    def active(self) -> list[SliceRecord]:
        return [r for r in self._slices.values() if r.state is SliceState.ACTIVE]

    def reservations(self) -> dict[Channel, float]:
        """Aggregate reserved bandwidth per channel over all active slices."""
        parts: dict[Channel, list[float]] = {}
        for r in self.active():
            for ch, bps in r.reserved:
                parts.setdefault(ch, []).append(bps)
        return {ch: math.fsum(v) for ch, v in sorted(parts.items())}

    def collect(self) -> StatsSnapshot:
        return self.backend.collect()

    def state_dict(self) -> dict:
        """Everything observable about the engine and the network it drives."""
        with self._lock:
            return {
                "slices": {sid: r.to_dict() for sid, r in self._slices.items()},
                "network": self.backend.state.to_dict(),
            }

    # helpers

    def _publish_reservations(self) -> None:
        self.backend.state.reserved = self.reservations()

    def _allocate_tag(self) -> int:
        used = {r.tag for r in self.active()}
        for tag in range(TAG_BASE, TAG_MAX + 1):
            if tag not in used:
                return tag
        raise InfeasibleError("slice tag space exhausted")

    def _plan(self, slice_id: str, tag: int, req: SliceRequest, stats: StatsSnapshot,
              old: Optional[SliceRecord]) -> tuple[_Plan, Optional[IncCatalogEntry]]:
        own = old.reserved if old else ()
        paths, reserved = embed(req, self.topology, stats, own, self.mtu)
        placements: list[tuple[NodeId, str]] = []
        points: dict[NodeId, NodeId] = {}
        commands: list[Command] = []
        program = None
        if req.inc_enabled:
            program = select_program(self.catalog, req.inc_function)
            headroom = {n: s.cpu_capacity - s.cpu_used for n, s in stats.switch_stats.items()}
            if old:
                for cmd in old.installed:
                    if isinstance(cmd, InstallExtern):
                        headroom[cmd.node] += cmd.spec.cpu_cost * cmd.offered_pps
            pps = req.bandwidth / (8 * self.mtu)
            nodes = place_inc(req.placement, paths, self.topology, headroom, program.spec, pps)
            points = transcode_points(paths, nodes)
            loads = _loads(points, pps)
            for n in nodes:
                ref = f"{slice_id}/{program.name}"
                placements.append((n, ref))
                commands.append(InstallExtern(n, program.spec, loads.get(n, 0.0), ref))
        refs = dict(placements)

        entries: dict[tuple[NodeId, NodeId], TableEntry] = {}
        for dst, path in paths.items():
            for u, v in path_channels(path):
                if not self.topology.is_switch(u):
                    continue
                if points.get(dst) == u:
                    action = TranscodeThenForward(refs[u], v)
                else:
                    action = Forward(v)
                entries[(u, dst)] = TableEntry(tag, dst, action)
        commands.extend(InstallEntry(u, e) for (u, _), e in entries.items())
        return _Plan(paths, reserved, placements, points, commands), program

    def _apply_all(self, commands: Sequence[Command]) -> None:
        """Apply commands in order; on failure undo the ones already applied."""
        done: list[Command] = []
        try:
            for cmd in commands:
                self.backend.apply(cmd)
                done.append(cmd)
        except HolosliceError:
            self._undo(done)
            raise

    def _undo(self, commands: Sequence[Command]) -> None:
        for cmd in reversed(commands):
            if isinstance(cmd, InstallEntry):
                inverse = RemoveEntry(cmd.node, cmd.entry.tag, cmd.entry.dst)
            elif isinstance(cmd, InstallExtern):
                inverse = RemoveExtern(cmd.node, cmd.ref)
            else:
                continue
            self.backend.apply(inverse)

    # mutations

    def create_slice(self, req: SliceRequest) -> SliceRecord:
        """Run the creation steps and return the active slice record.

        Raises :class:`ValidationError`, :class:`InfeasibleError` (including
        :class:`NoFeasiblePlacementError`) or :class:`UnknownProgramError`;
        on any failure the network is left as it was.
        """
        with self._lock:
            c = self.step_costs
            steps = [("validate", c.validate)]
            req.validate(self.topology)
            if req.inc_enabled:
                select_program(self.catalog, req.inc_function)

            stats = self.backend.collect()
            steps.append(("collect_stats", c.collect_stats + self.backend.command_latency_s))

            slice_id = f"slice-{next(self._ids)}"
            tag = self._allocate_tag()
            plan, program = self._plan(slice_id, tag, req, stats, None)
            self._apply_all(plan.commands)

            entry_cmds = sum(isinstance(x, InstallEntry) for x in plan.commands)
            per_cmd = self.backend.command_latency_s
            steps.append(("embed", c.embed + entry_cmds * per_cmd))
            if req.inc_enabled:
                steps.append(("select_program", c.select_program))
                steps.append(("place", c.place + len(plan.placements) * per_cmd))

            record = SliceRecord(
                slice_id=slice_id,
                tag=tag,
                request=req,
                paths=plan.paths,
                reserved=tuple(plan.reserved),
                placements=tuple(plan.placements),
                transcode_at=plan.points,
                state=SliceState.ACTIVE,
                creation_steps=tuple(steps),
                installed=tuple(plan.commands),
            )
            self._slices[slice_id] = record
            self._publish_reservations()
            return record

    def update_slice(self, slice_id: str, bandwidth: Optional[float] = None,
                     attendees: Optional[Sequence[NodeId]] = None) -> SliceRecord:
        """Re-embed (and re-place) an active slice with a new bandwidth and/or
        attendee list. All-or-nothing: on failure the old slice is untouched."""
        with self._lock:
            old = self._require_active(slice_id)
            changes = {}
            if bandwidth is not None:
                changes["bandwidth"] = bandwidth
            if attendees is not None:
                changes["attendees"] = tuple(attendees)
                pinned = {k: v for k, v in old.request.pinned_paths.items()
                          if k in changes["attendees"] or k == old.request.edge_server}
                changes["pinned_paths"] = pinned
            req = replace(old.request, **changes)
            req.validate(self.topology)
            stats = self.backend.collect()
            plan, _ = self._plan(slice_id, old.tag, req, stats, old)

            self._undo(old.installed)
            try:
                self._apply_all(plan.commands)
            except HolosliceError:
                self._apply_all(old.installed)
                raise
            record = replace(
                old,
                request=req,
                paths=plan.paths,
                reserved=tuple(plan.reserved),
                placements=tuple(plan.placements),
                transcode_at=plan.points,
                installed=tuple(plan.commands),
            )
            self._slices[slice_id] = record
            self._publish_reservations()
            return record

    def delete_slice(self, slice_id: str) -> dict:
        """Tear down an active slice and return what was released."""
        with self._lock:
            old = self._require_active(slice_id)
            self._undo(old.installed)
            self._slices[slice_id] = replace(old, state=SliceState.DECOMMISSIONED, installed=())
            self._publish_reservations()
            return {
                "slice_id": slice_id,
                "tag": old.tag,
                "reserved": [{"channel": f"{u}->{v}", "bps": bps} for (u, v), bps in old.reserved],
                "entries": sum(isinstance(x, InstallEntry) for x in old.installed),
                "externs": [{"node": n, "extern": ref} for n, ref in old.placements],
            }

    def _require_active(self, slice_id: str) -> SliceRecord:
        rec = self.get_slice(slice_id)
        if rec.state is not SliceState.ACTIVE:
            raise UnknownSliceError(f"slice {slice_id!r} is {rec.state.value}")
        return rec
