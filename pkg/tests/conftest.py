from __future__ import annotations

import time

import pytest

from holoslice.dataplane import Forward, SwitchState, TableEntry
from holoslice.engine import SliceEngine
from holoslice.monitor import BACKENDS, NetworkState
from holoslice.scenarios import FIG3_TOPOLOGY, SCENARIOS, ScenarioSpec, simulate
from holoslice.topology import load_topology


@pytest.fixture(scope="session")
def fig3():
    return load_topology(FIG3_TOPOLOGY)


@pytest.fixture
def engine(fig3):
    return SliceEngine(fig3, BACKENDS["direct"](NetworkState(fig3)))


class ScenarioRuns(dict):
    elapsed_s: float = 0.0


@pytest.fixture(scope="session")
def scenario_runs():
    """The five scenarios at scaled defaults, simulated once per session."""
    runs = ScenarioRuns()
    t0 = time.perf_counter()
    for name in SCENARIOS:
        runs[name] = simulate(ScenarioSpec(name))
    runs.elapsed_s = time.perf_counter() - t0
    return runs


def line_topology(n_switches: int, capacity_mbps: float = 12.0, prop_ms: float = 0.5):
    """src - S1 - ... - Sn - dst"""
    names = [f"S{i}" for i in range(1, n_switches + 1)]
    nodes = [{"id": "src", "kind": "streaming_server"}, {"id": "dst", "kind": "host"}]
    nodes += [{"id": s, "kind": "switch"} for s in names]
    chain = ["src", *names, "dst"]
    links = [{"a": a, "b": b, "capacity_mbps": capacity_mbps, "prop_delay_ms": prop_ms}
             for a, b in zip(chain, chain[1:])]
    return load_topology({"nodes": nodes, "links": links}), chain


def line_switches(topo, chain, tag):
    """Switch states with forwarding entries from chain[0] to chain[-1]."""
    sws = {n: SwitchState.for_node(n, topo.nodes[n]) for n in chain if topo.is_switch(n)}
    for u, v in zip(chain, chain[1:]):
        if u in sws:
            sws[u].install_entry(TableEntry(tag, chain[-1], Forward(v)))
    return sws
