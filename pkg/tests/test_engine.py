import copy

import pytest

from holoslice.engine import (
    Catalog,
    Explicit,
    GreedyMinLoad,
    NearAudience,
    NearSource,
    SliceEngine,
    SliceRequest,
    SliceState,
    StepCosts,
    load_catalog,
    select_program,
)
from holoslice.errors import (
    ConfigError,
    InfeasibleError,
    NoFeasiblePlacementError,
    UnknownProgramError,
    UnknownSliceError,
    ValidationError,
)
from holoslice.monitor import BACKENDS, NetworkState
from holoslice.scenarios import HOSTS, PUBLISHED_ROUTES
from holoslice.sim import FlowSpec, run
from holoslice.topology import load_topology

STREAM_BPS = 9000 * 8 * 30


def concert(**kw):
    base = dict(bandwidth=STREAM_BPS, latency_bound=0.5, max_attendees=5,
                attendees=HOSTS, source="streamsrv")
    base.update(kw)
    return SliceRequest(**base)


def _switch_seq(t, path):
    return tuple(n for n in path if t.is_switch(n))


def test_non_inc_three_steps(engine, fig3):
    rec = engine.create_slice(concert())
    assert [s for s, _ in rec.creation_steps] == ["validate", "collect_stats", "embed"]
    assert rec.placements == ()
    assert rec.state is SliceState.ACTIVE
    for h in HOSTS:
        assert _switch_seq(fig3, rec.paths[h]) == PUBLISHED_ROUTES["hosts"][h]


def test_inc_near_source(engine):
    rec = engine.create_slice(concert(inc_enabled=True, placement=NearSource()))
    assert [s for s, _ in rec.creation_steps] == [
        "validate", "collect_stats", "embed", "select_program", "place"]
    assert [n for n, _ in rec.placements] == ["S10"]
    assert set(rec.transcode_at.values()) == {"S10"}


def test_inc_near_audience(engine):
    rec = engine.create_slice(concert(inc_enabled=True, placement=NearAudience()))
    assert {n for n, _ in rec.placements} == {"S11", "S1", "S2"}
    assert rec.transcode_at == {"host1": "S11", "host2": "S11", "host3": "S2",
                                "host4": "S2", "host5": "S1"}


def _total_bytes(fig3, placement_node):
    """Bytes on every channel when one switch transcodes, measured by simulation."""
    eng = SliceEngine(fig3, BACKENDS["direct"](NetworkState(fig3)))
    rec = eng.create_slice(concert(inc_enabled=True, placement=Explicit((placement_node,))))
    flow = FlowSpec.at_fps("s", "streamsrv", HOSTS, 3, 9000, 30, tag=rec.tag)
    return sum(run(fig3, eng.backend.state.switches, [flow]).link_bytes.values())


def test_greedy_min_load_matches_simulated_bytes(engine, fig3):
    rec = engine.create_slice(concert(inc_enabled=True, placement=GreedyMinLoad()))
    candidates = sorted({n for p in rec.paths.values() for n in p if fig3.is_switch(n)})
    measured = {n: _total_bytes(fig3, n) for n in candidates}
    best = min(candidates, key=lambda n: (measured[n], n))
    assert [n for n, _ in rec.placements] == [best] == ["S10"]


def test_explicit_off_path(engine):
    with pytest.raises(NoFeasiblePlacementError):
        engine.create_slice(concert(inc_enabled=True, placement=Explicit(("S9",))))


def test_explicit_non_switch(engine):
    with pytest.raises(ValidationError):
        engine.create_slice(concert(inc_enabled=True, placement=Explicit(("host1",))))


def test_cpu_exhausted_everywhere(fig3):
    cat = load_catalog().with_override("transcoder", cpu_cost=1e6)
    eng = SliceEngine(fig3, BACKENDS["direct"](NetworkState(fig3)), cat)
    for strategy in (NearSource(), NearAudience(), GreedyMinLoad()):
        with pytest.raises(NoFeasiblePlacementError):
            eng.create_slice(concert(inc_enabled=True, placement=strategy))
    assert eng.list_slices() == []
    assert all(not s.tables and not s.externs for s in eng.backend.state.switches.values())


def test_request_too_large(engine):
    with pytest.raises(InfeasibleError):
        engine.create_slice(concert(bandwidth=13e6))


def test_unknown_program(engine):
    with pytest.raises(UnknownProgramError):
        engine.create_slice(concert(inc_enabled=True, inc_function="compressor"))


@pytest.mark.parametrize("kw", [
    {"bandwidth": 0}, {"bandwidth": -5}, {"attendees": ()}, {"max_attendees": 2},
    {"attendees": ("host1", "host1"), "max_attendees": 5}, {"source": "S99"},
    {"edge_server": "host1"},
])
def test_invalid_requests(engine, kw):
    with pytest.raises(ValidationError):
        engine.create_slice(concert(**kw))


def _pair_net():
    return load_topology({
        "nodes": [{"id": "src", "kind": "streaming_server"}, {"id": "S1", "kind": "switch"},
                  {"id": "S2", "kind": "switch"}, {"id": "h", "kind": "host"}],
        "links": [{"a": "src", "b": "S1", "capacity_mbps": 12}, {"a": "S1", "b": "S2", "capacity_mbps": 12},
                  {"a": "S2", "b": "h", "capacity_mbps": 12}],
    })


def _one(bw, **kw):
    return SliceRequest(bandwidth=bw, latency_bound=1.0, max_attendees=1, attendees=("h",),
                        source="src", **kw)


def test_exact_residual_is_feasible():
    t = _pair_net()
    eng = SliceEngine(t, BACKENDS["direct"](NetworkState(t)))
    eng.create_slice(_one(12e6))
    snap = eng.collect()
    assert snap.link_stats[("S1", "S2")].reserved_bps == 12e6
    assert t.capacity(("S1", "S2")) - snap.link_stats[("S1", "S2")].reserved_bps == 0


def test_second_slice_on_bottleneck_rejected():
    t = _pair_net()
    eng = SliceEngine(t, BACKENDS["direct"](NetworkState(t)))
    eng.create_slice(_one(8e6))
    # residual oracle: 12 - 8 = 4 Mbit/s < 8 Mbit/s
    assert t.capacity(("S1", "S2")) - 8e6 < 8e6
    before = copy.deepcopy(eng.state_dict())
    with pytest.raises(InfeasibleError):
        eng.create_slice(_one(8e6))
    assert eng.state_dict() == before


def test_catalog_rules():
    cat = load_catalog()
    assert select_program(cat, "transcoder").spec.ratio == 0.4
    with pytest.raises(UnknownProgramError):
        select_program(cat, "")
    entry = cat.entries["transcoder"]
    with pytest.raises(ConfigError):
        Catalog([entry, entry])
    with pytest.raises(ConfigError):
        load_catalog({"programs": [{"name": "transcoder", "ratio": 0.4}] * 2})


def test_delete_restores_residual(engine):
    before = engine.collect().reserved()
    rec = engine.create_slice(concert(inc_enabled=True, placement=NearSource()))
    assert engine.collect().reserved()
    released = engine.delete_slice(rec.slice_id)
    assert released["tag"] == rec.tag and released["externs"]
    assert engine.collect().reserved() == before
    assert engine.get_slice(rec.slice_id).state is SliceState.DECOMMISSIONED
    assert all(not s.tables and not s.externs for s in engine.backend.state.switches.values())
    with pytest.raises(UnknownSliceError):
        engine.delete_slice(rec.slice_id)
    assert engine.create_slice(concert()).tag == rec.tag


def test_update_lower_bandwidth(engine):
    rec = engine.create_slice(concert())
    new = engine.update_slice(rec.slice_id, bandwidth=STREAM_BPS / 2)
    assert all(bps == STREAM_BPS / 2 for _, bps in new.reserved)
    assert new.tag == rec.tag


def test_update_infeasible_keeps_original(engine):
    rec = engine.create_slice(concert(inc_enabled=True, placement=NearSource()))
    before = copy.deepcopy(engine.state_dict())
    snap = engine.collect().to_dict()
    with pytest.raises(InfeasibleError):
        engine.update_slice(rec.slice_id, bandwidth=20e6)
    assert engine.state_dict() == before
    after = engine.collect().to_dict()
    assert {k: v for k, v in after.items() if k != "epoch"} == {k: v for k, v in snap.items() if k != "epoch"}


def test_update_attendees(engine, fig3):
    rec = engine.create_slice(concert(inc_enabled=True, placement=NearAudience()))
    new = engine.update_slice(rec.slice_id, attendees=["host1", "host5"])
    assert set(new.paths) == {"host1", "host5"}
    assert {n for n, _ in new.placements} == {"S11", "S1"}
    assert "S2" not in {n for n, s in engine.backend.state.switches.items() if s.externs}


def test_unknown_slice(engine):
    with pytest.raises(UnknownSliceError):
        engine.get_slice("slice-99")


def test_tags_unique(engine):
    tags = [engine.create_slice(concert()).tag for _ in range(4)]
    assert len(set(tags)) == 4
    assert tags == [0x88B5, 0x88B6, 0x88B7, 0x88B8]


def test_creation_time_positive_costs(fig3):
    costs = StepCosts(0.001, 0.001, 0.001, 0.001, 0.001)
    eng = SliceEngine(fig3, BACKENDS["controller"](NetworkState(fig3)), step_costs=costs)
    plain = eng.create_slice(concert())
    inc = eng.create_slice(concert(inc_enabled=True, placement=NearSource()))
    assert len(inc.creation_steps) == len(plain.creation_steps) + 2
    assert inc.creation_time > plain.creation_time


def test_placement_on_path(engine):
    for strategy in (NearSource(), NearAudience(), GreedyMinLoad(), Explicit(("S8", "S7"))):
        rec = engine.create_slice(concert(inc_enabled=True, placement=strategy))
        on_path = {n for p in rec.paths.values() for n in p}
        assert all(n in on_path for n, _ in rec.placements)
        engine.delete_slice(rec.slice_id)


def test_edge_slice_paths(engine, fig3):
    rec = engine.create_slice(concert(edge_server="edge2"))
    assert _switch_seq(fig3, rec.paths["edge2"]) == ("S10",)
    for h in HOSTS:
        assert rec.paths[h][0] == "edge2"


def test_request_dict_round_trip():
    req = concert(inc_enabled=True, placement=Explicit(("S8",)), pinned_paths={"host1": ("streamsrv", "S10")})
    assert SliceRequest.from_dict(req.to_dict()) == req
