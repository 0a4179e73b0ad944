import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holoslice.dataplane import TAG_BASE, Drop, ExternSpec, Forward, TableEntry, TranscodeThenForward
from holoslice.errors import BackendUnavailableError, HolosliceError, InvalidTargetError
from holoslice.monitor import (
    ControllerBackend,
    DirectDeviceBackend,
    InstallEntry,
    InstallExtern,
    NetworkState,
    RemoveEntry,
    RemoveExtern,
)
from holoslice.topology import load_topology

SMALL = load_topology({
    "nodes": [{"id": "S1", "kind": "switch", "cpu_capacity": 20}, {"id": "S2", "kind": "switch"},
              {"id": "h", "kind": "host"}],
    "links": [{"a": "S1", "b": "S2", "capacity_mbps": 12}, {"a": "S2", "b": "h", "capacity_mbps": 12}],
})
TRANSCODER = ExternSpec.from_ms("transcoder", 0.4, 0.2, 10.0)


def test_idle_snapshot(fig3):
    b = DirectDeviceBackend(NetworkState(fig3))
    snap = b.collect()
    assert all(s.utilization == 0 and s.bytes_carried == 0 for s in snap.link_stats.values())
    assert all(s.cpu_used == 0 for s in snap.switch_stats.values())
    b.apply(InstallExtern("S4", TRANSCODER, 1.0, "x"))
    snap = b.collect()
    assert snap.switch_stats["S4"].cpu_used == 10
    assert sum(s.cpu_used for s in snap.switch_stats.values()) == 10
    assert snap.epoch == 2


def test_collect_after_ec1_matches_trace(scenario_runs):
    setup, result = scenario_runs["ec1"]
    snap = setup.engine.collect()
    folded = {}
    for rec in result.trace:
        for h in rec.hops:
            folded[h.channel] = folded.get(h.channel, 0) + h.size
    for ch, stats in snap.link_stats.items():
        assert stats.bytes_carried == folded.get(ch, 0)
    assert sum(folded.values()) > 0


def test_snapshot_reserved_matches_engine_ledger(scenario_runs):
    for setup, _ in scenario_runs.values():
        snap = setup.engine.collect()
        ledger = setup.engine.reservations()
        assert snap.reserved() == {ch: v for ch, v in ledger.items() if v}
        assert math.fsum(snap.reserved().values()) == math.fsum(ledger.values())


def test_controller_install_visible():
    b = ControllerBackend(NetworkState(SMALL))
    b.apply(InstallEntry("S1", TableEntry(TAG_BASE, "h", Forward("S2"))))
    assert b.collect().switch_stats["S1"].table_size == 1
    assert b.state.switches["S1"].lookup(TAG_BASE, "h").action == Forward("S2")
    assert b.controller.log


@pytest.mark.parametrize("cls", [ControllerBackend, DirectDeviceBackend])
def test_remove_entry_idempotent(cls):
    b = cls(NetworkState(SMALL))
    b.apply(InstallEntry("S1", TableEntry(TAG_BASE, "h", Forward("S2"))))
    assert b.apply(RemoveEntry("S1", TAG_BASE, "h")).changed
    ack = b.apply(RemoveEntry("S1", TAG_BASE, "h"))
    assert not ack.changed


@pytest.mark.parametrize("cls", [ControllerBackend, DirectDeviceBackend])
def test_invalid_target(cls):
    b = cls(NetworkState(SMALL))
    with pytest.raises(InvalidTargetError):
        b.apply(InstallExtern("h", TRANSCODER))
    with pytest.raises(InvalidTargetError):
        b.apply(InstallEntry("nowhere", TableEntry(TAG_BASE, "h", Drop())))


@pytest.mark.parametrize("cls", [ControllerBackend, DirectDeviceBackend])
def test_unavailable(cls):
    b = cls(NetworkState(SMALL))
    b.available = False
    with pytest.raises(BackendUnavailableError):
        b.collect()
    with pytest.raises(BackendUnavailableError):
        b.apply(RemoveEntry("S1", TAG_BASE, "h"))


def test_idle_snapshots_equal(fig3):
    a = ControllerBackend(NetworkState(fig3)).collect()
    b = DirectDeviceBackend(NetworkState(fig3)).collect()
    assert a == b


_nodes = st.sampled_from(["S1", "S2", "h"])
_tags = st.integers(TAG_BASE, TAG_BASE + 2)
_dsts = st.sampled_from(["h", "S1", "S2"])
_refs = st.sampled_from(["t0", "t1", "t2"])
_actions = st.one_of(
    st.builds(Forward, st.sampled_from(["S1", "S2", "h"])),
    st.builds(TranscodeThenForward, _refs, st.sampled_from(["S2", "h"])),
    st.just(Drop()),
)
_commands = st.one_of(
    st.builds(InstallEntry, _nodes, st.builds(TableEntry, _tags, _dsts, _actions)),
    st.builds(InstallExtern, _nodes,
              st.builds(ExternSpec, st.just("transcoder"), st.sampled_from([0.4, 1.0]),
                        st.integers(0, 10**6), st.sampled_from([1.0, 5.0, 8.0])),
              st.sampled_from([1.0, 2.0]), _refs),
    st.builds(RemoveEntry, _nodes, _tags, _dsts),
    st.builds(RemoveExtern, _nodes, _refs),
)


@settings(max_examples=300, deadline=None)
@given(st.lists(_commands, max_size=40))
def test_backend_equivalence(commands):
    states = [NetworkState(SMALL), NetworkState(SMALL)]
    backends = [ControllerBackend(states[0]), DirectDeviceBackend(states[1])]
    for cmd in commands:
        outcomes = []
        for b in backends:
            try:
                ack = b.apply(cmd)
                outcomes.append(("ok", ack.changed, ack.ref))
            except HolosliceError as exc:
                outcomes.append(("err", type(exc).__name__))
        assert outcomes[0] == outcomes[1]
    assert states[0].to_dict() == states[1].to_dict()
    assert backends[0].collect() == backends[1].collect()
