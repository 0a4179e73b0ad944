"""Programmable-switch emulation: match/action tables keyed on slice tag and
destination, forwarding actions, and extern compute functions with CPU
accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Union

from .errors import ConfigError, DuplicateEntryError, InsufficientCpuError, UnknownExternError
from .topology import NodeId, ProgrammableSwitch

TAG_BASE = 0x88B5
TAG_MAX = 0xFFFF

ExternRef = str


@dataclass(frozen=True)
class ExternSpec:
    """An in-switch compute function such as the transcoder.

    ``ratio`` scales packet size, ``per_packet_delay_ns`` is added to the
    pipeline delay, and ``cpu_cost`` is charged per packet/s of offered rate.
    """

    name: str
    ratio: float
    per_packet_delay_ns: int
    cpu_cost: float
    _exact_ratio: Fraction = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 < self.ratio <= 1:
            raise ConfigError(f"extern {self.name!r}: ratio must be in (0, 1], got {self.ratio}")
        if self.per_packet_delay_ns < 0:
            raise ConfigError(f"extern {self.name!r}: negative per-packet delay")
        if self.cpu_cost < 0:
            raise ConfigError(f"extern {self.name!r}: negative cpu cost")
        # decimal ratios like 0.4 must scale exactly, not via binary float
        object.__setattr__(self, "_exact_ratio", Fraction(repr(float(self.ratio))))

    @classmethod
    def from_ms(cls, name: str, ratio: float, per_packet_delay_ms: float, cpu_cost: float):
        return cls(name, ratio, int(round(per_packet_delay_ms * 1_000_000)), cpu_cost)

    def scaled_size(self, size: int) -> int:
        return math.ceil(size * self._exact_ratio)

    def with_extra_delay(self, extra_ns: int) -> ExternSpec:
        return ExternSpec(self.name, self.ratio, self.per_packet_delay_ns + extra_ns, self.cpu_cost)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "ratio": self.ratio,
            "per_packet_delay_ms": self.per_packet_delay_ns / 1e6,
            "cpu_cost": self.cpu_cost,
        }


@dataclass(frozen=True)
class Forward:
    next_hop: NodeId


@dataclass(frozen=True)
class TranscodeThenForward:
    extern: ExternRef
    next_hop: NodeId


@dataclass(frozen=True)
class Drop:
    pass


Action = Union[Forward, TranscodeThenForward, Drop]


@dataclass(frozen=True)
class TableEntry:
    tag: int
    dst: NodeId
    action: Action

    @property
    def key(self) -> tuple[int, NodeId]:
        return (self.tag, self.dst)


@dataclass(slots=True)
class Packet:
    tag: int
    stream_id: str
    seq: int
    size: int
    created_at: int  # ns
    dst: NodeId
    relay_to: Optional[NodeId] = None
    provenance: list = field(default_factory=list)  # (node, ns) on every arrival
    hops: list = field(default_factory=list)  # HopTiming per traversed channel


def _action_dict(action: Action) -> dict:
    if isinstance(action, Forward):
        return {"action": "forward", "next_hop": action.next_hop}
    if isinstance(action, TranscodeThenForward):
        return {"action": "transcode_then_forward", "extern": action.extern, "next_hop": action.next_hop}
    return {"action": "drop"}


class SwitchState:
    """Match/action table, extern instances and CPU budget of one switch."""

    def __init__(self, node: NodeId, cpu_capacity: float, pipeline_delay_ns: int = 0):
        if cpu_capacity <= 0:
            raise ConfigError(f"switch {node!r}: cpu_capacity must be positive")
        if pipeline_delay_ns < 0:
            raise ConfigError(f"switch {node!r}: negative pipeline delay")
        self.node = node
        self.cpu_capacity = cpu_capacity
        self.pipeline_delay_ns = pipeline_delay_ns
        self.tables: dict[tuple[int, NodeId], TableEntry] = {}
        self.externs: dict[ExternRef, ExternSpec] = {}
        self.extern_cost: dict[ExternRef, float] = {}

    @classmethod
    def for_node(cls, node: NodeId, kind: ProgrammableSwitch) -> SwitchState:
        return cls(node, kind.cpu_capacity, kind.pipeline_delay_ns)

    def __repr__(self) -> str:
        return (
            f"SwitchState({self.node!r}, entries={len(self.tables)}, "
            f"externs={len(self.externs)}, cpu={self.cpu_used:g}/{self.cpu_capacity:g})"
        )

    @property
    def cpu_used(self) -> float:
        return math.fsum(self.extern_cost.values())

    def lookup(self, tag: int, dst: NodeId) -> Optional[TableEntry]:
        return self.tables.get((tag, dst))

    def install_entry(self, entry: TableEntry) -> None:
        if entry.key in self.tables:
            raise DuplicateEntryError(
                f"{self.node}: entry for tag {entry.tag:#06x} dst {entry.dst!r} already installed"
            )
        if isinstance(entry.action, TranscodeThenForward) and entry.action.extern not in self.externs:
            raise UnknownExternError(f"{self.node}: extern {entry.action.extern!r} is not installed")
        self.tables[entry.key] = entry

    def remove_entry(self, tag: int, dst: NodeId) -> bool:
        return self.tables.pop((tag, dst), None) is not None

    def install_extern(
        self, spec: ExternSpec, offered_pps: float = 1.0, ref: Optional[ExternRef] = None
    ) -> ExternRef:
        """Instantiate ``spec`` and charge ``spec.cpu_cost * offered_pps`` CPU units."""
        ref = ref or spec.name
        if ref in self.externs:
            raise DuplicateEntryError(f"{self.node}: extern {ref!r} already installed")
        cost = spec.cpu_cost * offered_pps
        if self.cpu_used + cost > self.cpu_capacity:
            raise InsufficientCpuError(
                f"{self.node}: extern {ref!r} needs {cost:g} CPU units, "
                f"{self.cpu_capacity - self.cpu_used:g} available"
            )
        self.externs[ref] = spec
        self.extern_cost[ref] = cost
        return ref

    def remove_extern(self, ref: ExternRef) -> bool:
        if ref not in self.externs:
            return False
        for entry in self.tables.values():
            if isinstance(entry.action, TranscodeThenForward) and entry.action.extern == ref:
                raise UnknownExternError(f"{self.node}: extern {ref!r} still referenced by a table entry")
        del self.externs[ref]
        del self.extern_cost[ref]
        return True

    def process(self, packet: Packet) -> list[tuple[Packet, NodeId, int]]:
        """Apply the matching action. Returns ``(packet, next_hop, extra_delay_ns)``
        tuples; an empty list means the packet was dropped."""
        entry = self.tables.get((packet.tag, packet.dst))
        if entry is None:
            return []
        action = entry.action
        if type(action) is Forward:
            return [(packet, action.next_hop, self.pipeline_delay_ns)]
        if type(action) is TranscodeThenForward:
            spec = self.externs[action.extern]
            out = replace(packet, size=spec.scaled_size(packet.size))
            return [(out, action.next_hop, self.pipeline_delay_ns + spec.per_packet_delay_ns)]
        return []

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "cpu_capacity": self.cpu_capacity,
            "cpu_used": self.cpu_used,
            "pipeline_delay_ns": self.pipeline_delay_ns,
            "entries": [
                {"tag": e.tag, "dst": e.dst, **_action_dict(e.action)}
                for _, e in sorted(self.tables.items())
            ],
            "externs": {
                ref: {**spec.to_dict(), "cost": self.extern_cost[ref]}
                for ref, spec in sorted(self.externs.items())
            },
        }
