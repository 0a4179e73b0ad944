import dataclasses
import json

import pytest

from holoslice.cli import main
from holoslice.errors import ConfigError, RouteMismatchError, WorkloadMismatchError
from holoslice.scenarios import (
    HOSTS,
    PUBLISHED_ROUTES,
    SCENARIOS,
    ScenarioSpec,
    check_routes,
    compare,
    provision,
)
from holoslice.sim import MetricsReport, avg_latency


def test_route_fidelity(scenario_runs):
    for name, (setup, _) in scenario_runs.items():
        for dst, route in PUBLISHED_ROUTES[name].items():
            got = tuple(n for n in setup.record.paths[dst] if setup.topology.is_switch(n))
            assert "-".join(got) == "-".join(route), (name, dst)


def test_route_mismatch_is_reported(fig3):
    setup = provision(ScenarioSpec("hosts", frames=1))
    bad = dataclasses.replace(setup.record, paths={**setup.record.paths,
                                                   "host5": ("streamsrv", "S10", "S7", "host5")})
    with pytest.raises(RouteMismatchError, match="host5"):
        check_routes("hosts", bad, fig3)


def test_zero_drops(scenario_runs):
    for _, result in scenario_runs.values():
        assert result.report.dropped == 0
        assert len(result.trace) == result.report.injected == 1000 * 6 * 5


def test_avg_latency_recomputed_from_raw_trace(scenario_runs, tmp_path):
    _, result = scenario_runs["ec1"]
    for h in HOSTS:
        recs = [r for r in result.trace if r.dst == h]
        folded = sum(r.received_at_ns - r.sent_at_ns for r in recs) / len(recs)
        assert abs(avg_latency(result.trace, h) * 1e9 - folded) <= 1
        assert abs(result.report.avg_latency[h] * 1e9 - folded) <= 1


def test_ec_transcodes_at_edge(scenario_runs):
    _, result = scenario_runs["ec1"]
    for rec in result.trace:
        into_edge = [h for h in rec.hops if h.dst == "edge1"]
        out_of_edge = [h for h in rec.hops if h.src == "edge1"]
        assert into_edge[0].size == 1500 and out_of_edge[0].size == 600


def test_downstream_bytes_scaled(scenario_runs):
    setup, result = scenario_runs["inc_source"]
    for ch, n in result.link_bytes.items():
        if ch[0] != "streamsrv":
            assert n % 600 == 0
    assert result.link_bytes[("streamsrv", "S10")] == 1000 * 9000 * 5
    assert result.link_bytes[("S10", "S8")] == 1000 * 3600 * 3


def _reports(scenario_runs):
    return [scenario_runs[n][1].report for n in SCENARIOS]


def test_compare_identical():
    rep = MetricsReport(avg_latency={"host1": 0.02}, jitter={"host1": 0.001}, delivered={"host1": 10},
                        network_load=0.1, injected=10, dropped=0, span_s=1.0, link_bytes={},
                        workload={"frames": 1}, scenario="ec1")
    comp = compare([rep, rep])
    assert all(v == 1.0 for v in comp.load_ratio.values())
    assert all(v == 1.0 for lat in comp.latency_ratio.values() for v in lat.values())
    assert comp.latency_order["host1"] == [comp.scenarios]


def test_compare_rejects_mismatch():
    a = MetricsReport({"h": 0.1}, {"h": 0.0}, {"h": 1}, 0.1, 1, 0, 1.0, {}, {"frames": 10}, "ec1")
    b = dataclasses.replace(a, workload={"frames": 20}, scenario="ec2")
    with pytest.raises(WorkloadMismatchError):
        compare([a, b])
    with pytest.raises(ConfigError):
        compare([a])


def test_compare_all_five(scenario_runs):
    comp = compare(_reports(scenario_runs))
    assert comp.baseline == "ec1"
    assert comp.checks and all(comp.checks.values())
    assert all(comp.jitter_ok.values())
    for h in HOSTS:
        assert comp.latency_order[h][-1] == ["ec1"]


def test_comparison_recomputable(scenario_runs, tmp_path):
    for rep in _reports(scenario_runs):
        rep.write(tmp_path / f"{rep.scenario}.json")
    stored = [MetricsReport.read(tmp_path / f"{n}.json") for n in SCENARIOS]
    assert compare(stored).to_dict() == compare(_reports(scenario_runs)).to_dict()


def test_unknown_scenario():
    with pytest.raises(ConfigError):
        ScenarioSpec("ec3")


def test_cli_run_and_compare(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--scenario", "all", "--out", str(out), "--frames", "20", "--seedless"]) == 0
    files = sorted(p.name for p in out.iterdir())
    assert files == sorted([f"{n}.json" for n in SCENARIOS] + [f"{n}.csv" for n in SCENARIOS])
    doc = json.loads((out / "ec1.json").read_text())
    assert doc["workload"]["frames"] == 20
    capsys.readouterr()
    code = main(["compare", *sorted(str(p) for p in out.glob("*.json")), "--json", str(tmp_path / "c.json")])
    text = capsys.readouterr().out
    assert "[PASS] jitter < 15 ms in all scenarios" in text
    assert code == 0
    assert json.loads((tmp_path / "c.json").read_text())["schema"] == "holoslice.comparison/1"


def test_cli_reports_errors(tmp_path, capsys):
    a = tmp_path / "a"
    main(["run", "--scenario", "ec1", "--out", str(a), "--frames", "5", "--no-trace"])
    main(["run", "--scenario", "ec2", "--out", str(a), "--frames", "6", "--no-trace"])
    capsys.readouterr()
    assert main(["compare", str(a / "ec1.json"), str(a / "ec2.json")]) == 2
    assert "workload" in capsys.readouterr().err
