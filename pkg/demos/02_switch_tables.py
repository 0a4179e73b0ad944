"""
Match/action tables and the transcoder extern
=============================================

One programmable switch, driven by hand: install a transcoder, point a table
entry at it and push packets through.
"""

# %%

from holoslice.dataplane import TAG_BASE, ExternSpec, Forward, Packet, SwitchState, TableEntry, TranscodeThenForward
from holoslice.errors import InsufficientCpuError

sw = SwitchState("S10", cpu_capacity=100, pipeline_delay_ns=10_000)
transcoder = ExternSpec.from_ms("transcoder", ratio=0.4, per_packet_delay_ms=0.2, cpu_cost=0.01)

# %%
# CPU is charged per packet/s of offered rate: 720 pps at 0.01 units each.

ref = sw.install_extern(transcoder, offered_pps=720)
print(sw)

sw.install_entry(TableEntry(TAG_BASE, "host1", TranscodeThenForward(ref, "S8")))
sw.install_entry(TableEntry(TAG_BASE, "host3", Forward("S7")))

# %%
# A full-size packet for host1 leaves 60% smaller and 0.21 ms later.

for dst in ("host1", "host3"):
    [(out, nxt, delay_ns)] = sw.process(Packet(TAG_BASE, "demo", 0, 1500, 0, dst))
    print(f"{dst}: {out.size} B to {nxt} after {delay_ns / 1e6:.3f} ms")

# %%
# Packets of another slice find no entry and are dropped.

print("foreign tag:", sw.process(Packet(TAG_BASE + 1, "demo", 0, 1500, 0, "host1")))

# %%
# The CPU budget is never overcommitted.

try:
    sw.install_extern(ExternSpec("heavy", 1.0, 0, cpu_cost=1.0), offered_pps=99, ref="heavy")
except InsufficientCpuError as exc:
    print("rejected:", exc)
