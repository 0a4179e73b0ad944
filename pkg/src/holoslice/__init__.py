"""Provisioning of in-network-computing slices for holographic streaming.

Modules:

- ``topology``: network model, loader, shortest paths, residual bandwidth
- ``dataplane``: per-switch match/action tables and transcoding externs
- ``sim``: discrete-event packet simulator and metrics
- ``engine``: slice creation, embedding and INC placement
- ``monitor``: stats collection and the two southbound backends
- ``api``: JSON/HTTP slice management interface
- ``scenarios``: the five placement scenarios and their comparison
"""

from .dataplane import Drop, ExternSpec, Forward, Packet, SwitchState, TableEntry, TranscodeThenForward
from .engine import (
    Catalog,
    Explicit,
    GreedyMinLoad,
    NearAudience,
    NearSource,
    SliceEngine,
    SliceRecord,
    SliceRequest,
    SliceState,
    StepCosts,
    load_catalog,
)
from .errors import HolosliceError
from .monitor import ControllerBackend, DirectDeviceBackend, NetworkState, StatsSnapshot
from .scenarios import SCENARIOS, ScenarioSpec, compare, run_scenario
from .sim import FlowSpec, MetricsReport, PacketRecord, avg_latency, jitter, network_load, run
from .topology import Link, Topology, load_topology, residual_bandwidth, shortest_path

__version__ = "0.1.0"

__all__ = [
    "Catalog", "ControllerBackend", "DirectDeviceBackend", "Drop", "Explicit", "ExternSpec",
    "FlowSpec", "Forward", "GreedyMinLoad", "HolosliceError", "Link", "MetricsReport",
    "NearAudience", "NearSource", "NetworkState", "Packet", "PacketRecord", "SCENARIOS",
    "ScenarioSpec", "SliceEngine", "SliceRecord", "SliceRequest", "SliceState", "StatsSnapshot",
    "StepCosts", "SwitchState", "TableEntry", "Topology", "TranscodeThenForward", "avg_latency",
    "compare", "jitter", "load_catalog", "load_topology", "network_load", "residual_bandwidth",
    "run", "run_scenario", "shortest_path",
]
