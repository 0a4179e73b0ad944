"""
The five transcoding placements
===============================

Stream the same hologram through edge transcoding (two edge servers),
receiver-side transcoding, and in-network transcoding near the audience or
near the source, then compare. Pass ``--full`` for the full-length stream.
"""

# %%

import sys
import tempfile

from holoslice.scenarios import FULL_FRAMES, SCENARIOS, ScenarioSpec, compare, run_scenario

frames = FULL_FRAMES if "--full" in sys.argv else 1000
out = tempfile.mkdtemp(prefix="holoslice-")

reports = [run_scenario(ScenarioSpec(name, frames=frames), out) for name in SCENARIOS]
print(f"reports and traces in {out}\n")

# %%
# Latency, jitter and load side by side, plus the expected qualitative results.

print(compare(reports).to_text())
