"""
Topology and shortest paths
===========================

Load the canonical 11-switch network, look at what is in it, and ask for the
routes the holographic stream takes from the streaming server.
"""

# %%
# The packaged topology
# ---------------------

from holoslice.scenarios import FIG3_TOPOLOGY, HOSTS
from holoslice.topology import (
    EdgeServer,
    Host,
    ProgrammableSwitch,
    load_topology,
    residual_bandwidth,
    shortest_path,
)

topo = load_topology(FIG3_TOPOLOGY)
print("switches:", sorted(topo.nodes_of(ProgrammableSwitch)))
print("hosts:   ", sorted(topo.nodes_of(Host)))
print("edges:   ", sorted(topo.nodes_of(EdgeServer)))
print("fabric channels:", len(topo.fabric_channels()))

# %%
# Minimum-hop routes. Equal-length alternatives are broken by picking the
# lexicographically smallest next hop, so the answer never changes between runs.

for h in HOSTS:
    print(h, "-".join(shortest_path(topo, "streamsrv", h)))

# %%
# Residual bandwidth
# ------------------
# Reservations are per direction. Two 5 Mbit/s reservations on S10->S8 leave
# 2 Mbit/s there and the reverse direction untouched.

left = residual_bandwidth(topo, [(("S10", "S8"), 5e6), (("S10", "S8"), 5e6)])
print("S10->S8:", left[("S10", "S8")] / 1e6, "Mbit/s")
print("S8->S10:", left[("S8", "S10")] / 1e6, "Mbit/s")

# %%
# A topology document can also be given inline.

tiny = load_topology("""
nodes:
  - {id: cam, kind: streaming_server}
  - {id: sw, kind: switch, cpu_capacity: 50}
  - {id: viewer, kind: host}
links:
  - {a: cam, b: sw, capacity_mbps: 100, prop_delay_ms: 0.1}
  - {a: sw, b: viewer, capacity_mbps: 10}
""")
print(shortest_path(tiny, "cam", "viewer"))
