"""Resource-utilization monitor and southbound adapter.

Two interchangeable backends reach the (simulated) switches: one through an
SDN controller that speaks a message format of its own, one directly to the
devices. Both expose the same ``collect``/``apply`` calls and must leave the
network in identical states for identical command sequences.
"""

from __future__ import annotations

import json
import threading
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Union

from .dataplane import Drop, ExternSpec, Forward, SwitchState, TableEntry, TranscodeThenForward
from .errors import BackendUnavailableError, InvalidTargetError
from .topology import Channel, NodeId, ProgrammableSwitch, Topology


class NetworkState:
    """Live infrastructure: switch states, carried-byte counters and the
    reservation ledger pushed by the slice engine."""

    def __init__(self, topology: Topology):
        self.topology = topology
        self.switches: dict[NodeId, SwitchState] = {
            n: SwitchState.for_node(n, k)
            for n, k in sorted(topology.nodes.items())
            if isinstance(k, ProgrammableSwitch)
        }
        self.reserved: dict[Channel, float] = {}
        self.bytes_carried: Counter = Counter()
        self.observed_s = 0.0
        self.lock = threading.RLock()

    def record_run(self, link_bytes, span_s: float) -> None:
        with self.lock:
            self.bytes_carried.update(link_bytes)
            self.observed_s += span_s

    def to_dict(self) -> dict:
        with self.lock:
            return {
                "switches": {n: s.to_dict() for n, s in self.switches.items()},
                "reserved": {f"{u}->{v}": bps for (u, v), bps in sorted(self.reserved.items()) if bps},
                "bytes_carried": {f"{u}->{v}": n for (u, v), n in sorted(self.bytes_carried.items())},
            }


@dataclass(frozen=True)
class LinkStats:
    bytes_carried: int
    utilization: float
    reserved_bps: float


@dataclass(frozen=True)
class SwitchStats:
    cpu_capacity: float
    cpu_used: float
    table_size: int


@dataclass(frozen=True)
class StatsSnapshot:
    epoch: int
    link_stats: dict[Channel, LinkStats]
    switch_stats: dict[NodeId, SwitchStats]

    def reserved(self) -> dict[Channel, float]:
        return {ch: s.reserved_bps for ch, s in self.link_stats.items() if s.reserved_bps}

    def to_dict(self) -> dict:
        return {
            "schema": "holoslice.stats/1",
            "epoch": self.epoch,
            "link_stats": {
                f"{u}->{v}": {
                    "bytes_carried": s.bytes_carried,
                    "utilization": s.utilization,
                    "reserved_bps": s.reserved_bps,
                }
                for (u, v), s in sorted(self.link_stats.items())
            },
            "switch_stats": {
                n: {"cpu_capacity": s.cpu_capacity, "cpu_used": s.cpu_used, "table_size": s.table_size}
                for n, s in sorted(self.switch_stats.items())
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# -- commands --------------------------------------------------------------


@dataclass(frozen=True)
class InstallEntry:
    node: NodeId
    entry: TableEntry


@dataclass(frozen=True)
class InstallExtern:
    node: NodeId
    spec: ExternSpec
    offered_pps: float = 1.0
    ref: Optional[str] = None


@dataclass(frozen=True)
class RemoveEntry:
    node: NodeId
    tag: int
    dst: NodeId


@dataclass(frozen=True)
class RemoveExtern:
    node: NodeId
    ref: str


Command = Union[InstallEntry, InstallExtern, RemoveEntry, RemoveExtern]


@dataclass(frozen=True)
class Ack:
    command: Command
    changed: bool
    ref: Optional[str] = None
    latency_s: float = 0.0


# -- backends --------------------------------------------------------------


class AdapterBackend:
    name = "abstract"
    default_latency_s = 0.0

    def __init__(self, state: NetworkState, command_latency_s: Optional[float] = None):
        self.state = state
        self.command_latency_s = (
            self.default_latency_s if command_latency_s is None else command_latency_s
        )
        self.available = True
        self._epoch = 0

    @property
    def topology(self) -> Topology:
        return self.state.topology

    def _check(self) -> None:
        if not self.available:
            raise BackendUnavailableError(f"{self.name} backend is unavailable")

    def _switch(self, node: NodeId) -> SwitchState:
        if node not in self.topology.nodes:
            raise InvalidTargetError(f"unknown node {node!r}")
        sw = self.state.switches.get(node)
        if sw is None:
            raise InvalidTargetError(f"{node!r} is not a programmable switch")
        return sw

    def collect(self) -> StatsSnapshot:
        """Read a consistent snapshot of link and switch counters."""
        self._check()
        with self.state.lock:
            self._epoch += 1
            t = self.topology
            span = self.state.observed_s
            links = {}
            for ch in t.channels():
                carried = self.state.bytes_carried.get(ch, 0)
                util = carried * 8 / span / t.capacity(ch) if span > 0 else 0.0
                links[ch] = LinkStats(carried, util, self.state.reserved.get(ch, 0.0))
            switches = {
                n: SwitchStats(s.cpu_capacity, s.cpu_used, len(s.tables))
                for n, s in self.state.switches.items()
            }
            return StatsSnapshot(self._epoch, links, switches)

    def apply(self, command: Command) -> Ack:
        self._check()
        with self.state.lock:
            self._switch(command.node)
            changed, ref = self._apply(command)
        return Ack(command, changed, ref, self.command_latency_s)

    def _apply(self, command: Command) -> tuple[bool, Optional[str]]:
        raise NotImplementedError


class DirectDeviceBackend(AdapterBackend):
    """Talks to each programmable switch directly."""

    name = "direct"
    default_latency_s = 0.001

    def _apply(self, command):
        sw = self._switch(command.node)
        if isinstance(command, InstallEntry):
            sw.install_entry(command.entry)
            return True, None
        if isinstance(command, InstallExtern):
            ref = sw.install_extern(command.spec, command.offered_pps, command.ref)
            return True, ref
        if isinstance(command, RemoveEntry):
            return sw.remove_entry(command.tag, command.dst), None
        if isinstance(command, RemoveExtern):
            return sw.remove_extern(command.ref), None
        raise TypeError(f"unknown command {command!r}")


def _encode_action(action) -> dict:
    if isinstance(action, Forward):
        return {"type": "output", "port": action.next_hop}
    if isinstance(action, TranscodeThenForward):
        return {"type": "extern_then_output", "extern": action.extern, "port": action.next_hop}
    return {"type": "drop"}


def _decode_action(doc: dict):
    if doc["type"] == "output":
        return Forward(doc["port"])
    if doc["type"] == "extern_then_output":
        return TranscodeThenForward(doc["extern"], doc["port"])
    return Drop()


class SimulatedController:
    """Stand-in SDN controller: receives serialized rule messages and programs
    the switches it manages."""

    def __init__(self, state: NetworkState):
        self.state = state
        self.log: list[str] = []

    def handle(self, message: str) -> dict:
        self.log.append(message)
        msg = json.loads(message)
        sw = self.state.switches[msg["dpid"]]
        op = msg["op"]
        if op == "flow_add":
            sw.install_entry(TableEntry(msg["match"]["ethertype"], msg["match"]["dst"],
                                        _decode_action(msg["action"])))
            return {"status": "ok", "changed": True}
        if op == "flow_delete":
            changed = sw.remove_entry(msg["match"]["ethertype"], msg["match"]["dst"])
            return {"status": "ok", "changed": changed}
        if op == "extern_add":
            spec = ExternSpec(msg["extern"]["name"], msg["extern"]["ratio"],
                              msg["extern"]["per_packet_delay_ns"], msg["extern"]["cpu_cost"])
            ref = sw.install_extern(spec, msg["offered_pps"], msg.get("ref"))
            return {"status": "ok", "changed": True, "ref": ref}
        if op == "extern_delete":
            return {"status": "ok", "changed": sw.remove_extern(msg["ref"])}
        raise ValueError(f"unsupported controller op {op!r}")


class ControllerBackend(AdapterBackend):
    """Programs switches through an SDN controller's message interface."""

    name = "controller"
    default_latency_s = 0.005

    def __init__(self, state: NetworkState, command_latency_s: Optional[float] = None,
                 controller: Optional[SimulatedController] = None):
        super().__init__(state, command_latency_s)
        self.controller = controller or SimulatedController(state)

    def _apply(self, command):
        if isinstance(command, InstallEntry):
            e = command.entry
            msg = {"op": "flow_add", "dpid": command.node,
                   "match": {"ethertype": e.tag, "dst": e.dst}, "action": _encode_action(e.action)}
        elif isinstance(command, InstallExtern):
            s = command.spec
            msg = {"op": "extern_add", "dpid": command.node, "ref": command.ref,
                   "offered_pps": command.offered_pps,
                   "extern": {"name": s.name, "ratio": s.ratio,
                              "per_packet_delay_ns": s.per_packet_delay_ns, "cpu_cost": s.cpu_cost}}
        elif isinstance(command, RemoveEntry):
            msg = {"op": "flow_delete", "dpid": command.node,
                   "match": {"ethertype": command.tag, "dst": command.dst}}
        elif isinstance(command, RemoveExtern):
            msg = {"op": "extern_delete", "dpid": command.node, "ref": command.ref}
        else:
            raise TypeError(f"unknown command {command!r}")
        reply = self.controller.handle(json.dumps(msg, sort_keys=True))
        return reply["changed"], reply.get("ref")


BACKENDS = {"controller": ControllerBackend, "direct": DirectDeviceBackend}
