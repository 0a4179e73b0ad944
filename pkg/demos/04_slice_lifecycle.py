"""
Slice lifecycle
===============

Create, update and delete slices through the engine, and watch what the
monitor sees.
"""

# %%

from holoslice.engine import NearAudience, NearSource, SliceEngine, SliceRequest
from holoslice.errors import InfeasibleError
from holoslice.monitor import ControllerBackend, NetworkState
from holoslice.scenarios import FIG3_TOPOLOGY, HOSTS
from holoslice.topology import load_topology

topo = load_topology(FIG3_TOPOLOGY)
engine = SliceEngine(topo, ControllerBackend(NetworkState(topo)))

concert = dict(bandwidth=2.16e6, latency_bound=0.5, max_attendees=5, attendees=HOSTS, source="streamsrv")

# %%
# Without INC the engine runs three steps, with INC five.

plain = engine.create_slice(SliceRequest(**concert))
inc = engine.create_slice(SliceRequest(**concert, inc_enabled=True, placement=NearSource()))
for rec in (plain, inc):
    steps = ", ".join(f"{s} {c * 1e3:.0f} ms" for s, c in rec.creation_steps)
    print(f"{rec.slice_id} tag {rec.tag:#06x}: {steps} -> {rec.creation_time * 1e3:.0f} ms")
print("transcoder placed on", [n for n, _ in inc.placements])

# %%
# Moving the transcoders next to the audience.

near = engine.create_slice(SliceRequest(**concert, inc_enabled=True, placement=NearAudience()))
print("near the audience:", sorted(n for n, _ in near.placements))

# %%
# The streamsrv uplink is 12 Mbit/s, so a request for 6 more cannot fit.

try:
    engine.create_slice(SliceRequest(**{**concert, "bandwidth": 6e6}))
except InfeasibleError as exc:
    print("rejected:", exc)

snap = engine.collect()
print("reserved on streamsrv->S10:", snap.link_stats[("streamsrv", "S10")].reserved_bps / 1e6, "Mbit/s")

# %%
# Updates are all-or-nothing; deletes give everything back.

engine.update_slice(plain.slice_id, attendees=["host1", "host2"])
print(engine.delete_slice(near.slice_id))
print("reserved now:", engine.collect().link_stats[("streamsrv", "S10")].reserved_bps / 1e6, "Mbit/s")
