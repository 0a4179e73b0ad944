"""
The management API
==================

Start the HTTP service on a free port and drive it with plain urllib.
``holoslice serve`` does the same from the command line.
"""

# %%

import json
import threading
import urllib.request
from urllib.error import HTTPError

from holoslice.api import make_server
from holoslice.engine import SliceEngine
from holoslice.monitor import ControllerBackend, NetworkState
from holoslice.scenarios import FIG3_TOPOLOGY
from holoslice.topology import load_topology

topo = load_topology(FIG3_TOPOLOGY)
server = make_server(SliceEngine(topo, ControllerBackend(NetworkState(topo))), "127.0.0.1:0")
threading.Thread(target=server.serve_forever, daemon=True).start()
base = "http://%s:%d" % server.server_address[:2]


def call(method, path, body=None):
    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(base + path, data=data, method=method)
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())
    except HTTPError as err:
        return err.code, json.loads(err.read())


# %%

request = {"bandwidth_bps": 2.16e6, "latency_bound_s": 0.5, "max_attendees": 5,
           "attendees": ["host1", "host2", "host3", "host4", "host5"], "source": "streamsrv",
           "inc_enabled": True, "placement": {"strategy": "near_source"}}
status, rec = call("POST", "/slices", request)
print(status, rec["slice_id"], rec["ethertype"], [s["step"] for s in rec["creation_steps"]])

print(call("PATCH", f"/slices/{rec['slice_id']}", {"attendees": ["host1", "host5"]})[0])
print(call("POST", "/slices", {**request, "bandwidth_bps": 50e6}))
print(call("GET", "/slices/slice-99"))
print(call("DELETE", f"/slices/{rec['slice_id']}")[1]["released"])

server.shutdown()
