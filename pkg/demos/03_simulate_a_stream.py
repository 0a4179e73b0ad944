"""
Packet-level simulation of one stream
=====================================

Build a slice by hand on a three-switch line, stream 30 frames through it and
read the metrics.
"""

# %%

from holoslice.dataplane import TAG_BASE, Forward, SwitchState, TableEntry
from holoslice.sim import FlowSpec, run, trace_to_csv
from holoslice.topology import load_topology

topo = load_topology({
    "nodes": [{"id": "src", "kind": "streaming_server"}, {"id": "h1", "kind": "host"},
              {"id": "h2", "kind": "host"}] + [{"id": s, "kind": "switch"} for s in ("S1", "S2", "S3")],
    "links": [{"a": "src", "b": "S1", "capacity_mbps": 12}, {"a": "S1", "b": "S2", "capacity_mbps": 12},
              {"a": "S2", "b": "S3", "capacity_mbps": 12}, {"a": "S3", "b": "h1", "capacity_mbps": 12},
              {"a": "S3", "b": "h2", "capacity_mbps": 12}],
})

switches = {s: SwitchState.for_node(s, topo.nodes[s]) for s in ("S1", "S2", "S3")}
for h in ("h1", "h2"):
    switches["S1"].install_entry(TableEntry(TAG_BASE, h, Forward("S2")))
    switches["S2"].install_entry(TableEntry(TAG_BASE, h, Forward("S3")))
    switches["S3"].install_entry(TableEntry(TAG_BASE, h, Forward(h)))

# %%
# Each frame is split into MTU packets and every packet is copied to h1, then h2.

flow = FlowSpec.at_fps("holo", "src", ["h1", "h2"], frame_count=30, frame_size=9000, fps=30)
result = run(topo, switches, [flow])
rep = result.report

for h in ("h1", "h2"):
    print(f"{h}: latency {rep.avg_latency[h] * 1e3:.3f} ms, jitter {rep.jitter[h] * 1e3:.3f} ms")
print(f"network load {rep.network_load:.4f}, {rep.injected} injected, {rep.dropped} dropped")

# %%
# Every hop of every packet is kept, so latency can be taken apart.

first = result.trace[0]
for hop in first.hops:
    print(f"  {hop.src}->{hop.dst}: waited {hop.wait} ns, on the wire {hop.finished - hop.started} ns")

print(trace_to_csv(result.trace[:3]))
