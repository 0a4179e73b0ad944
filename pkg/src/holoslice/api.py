"""Slice management interface: JSON over HTTP in front of a :class:`SliceEngine`.

Endpoints (schemas in ``docs/api.md``)::

    POST   /slices           create a slice         201 | 400 | 409 | 503
    GET    /slices           list slices            200
    GET    /slices/{id}      fetch one slice        200 | 404
    PATCH  /slices/{id}      change bandwidth/attendees  200 | 400 | 404 | 409 | 503
    DELETE /slices/{id}      decommission           200 | 404 | 503
    GET    /stats            latest monitor snapshot 200 | 503
"""

from __future__ import annotations

import json
import logging
import os
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

from .engine import SliceEngine, SliceRequest
from .errors import (
    BackendUnavailableError,
    HolosliceError,
    InfeasibleError,
    UnknownProgramError,
    UnknownSliceError,
    ValidationError,
)

API_VERSION = "holoslice.api/1"
ADDR_ENV = "HOLOSLICE_ADDR"
DEFAULT_ADDR = "127.0.0.1:8080"

log = logging.getLogger(__name__)


def _status_for(exc: HolosliceError) -> int:
    if isinstance(exc, ValidationError):
        return 400
    if isinstance(exc, UnknownSliceError):
        return 404
    if isinstance(exc, (InfeasibleError, UnknownProgramError)):
        return 409
    if isinstance(exc, BackendUnavailableError):
        return 503
    return 400


def error_body(code: str, message: str) -> dict:
    return {"version": API_VERSION, "error": {"code": code, "message": message}}


class SliceApi:
    """Transport-independent request handling; the HTTP server delegates here."""

    def __init__(self, engine: SliceEngine):
        self.engine = engine

    def handle(self, method: str, path: str, body: bytes = b"") -> tuple[int, dict]:
        parts = [p for p in path.split("?", 1)[0].split("/") if p]
        try:
            doc = json.loads(body) if body else None
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            return 400, error_body("malformed_json", str(exc))
        try:
            return self._route(method.upper(), parts, doc)
        except HolosliceError as exc:
            return _status_for(exc), error_body(exc.code, str(exc))

    def _route(self, method, parts, doc) -> tuple[int, dict]:
        eng = self.engine
        if parts == ["stats"] and method == "GET":
            return 200, eng.collect().to_dict()
        if parts == ["slices"]:
            if method == "POST":
                record = eng.create_slice(SliceRequest.from_dict(doc))
                return 201, record.to_dict()
            if method == "GET":
                return 200, {"version": API_VERSION, "slices": [r.to_dict() for r in eng.list_slices()]}
        if len(parts) == 2 and parts[0] == "slices":
            sid = parts[1]
            if method == "GET":
                return 200, eng.get_slice(sid).to_dict()
            if method == "PATCH":
                if not isinstance(doc, dict) or not doc.keys() & {"bandwidth_bps", "attendees"}:
                    raise ValidationError("PATCH body needs 'bandwidth_bps' and/or 'attendees'")
                bw = doc.get("bandwidth_bps")
                if bw is not None and (isinstance(bw, bool) or not isinstance(bw, (int, float))):
                    raise ValidationError("'bandwidth_bps' must be a number")
                att = doc.get("attendees")
                if att is not None and not isinstance(att, list):
                    raise ValidationError("'attendees' must be a list")
                return 200, eng.update_slice(sid, bandwidth=bw, attendees=att).to_dict()
            if method == "DELETE":
                return 200, {"version": API_VERSION, "released": eng.delete_slice(sid)}
        return 404, error_body("not_found", f"no route for {method} /{'/'.join(parts)}")


class _Handler(BaseHTTPRequestHandler):
    api: SliceApi  # set on the per-server subclass

    def _dispatch(self):
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        status, doc = self.api.handle(self.command, self.path, body)
        payload = json.dumps(doc, sort_keys=True).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    do_GET = do_POST = do_PATCH = do_DELETE = _dispatch

    def log_message(self, fmt, *args):
        log.info("%s - %s", self.address_string(), fmt % args)


def parse_addr(addr: Optional[str]) -> tuple[str, int]:
    addr = addr or os.environ.get(ADDR_ENV) or DEFAULT_ADDR
    host, _, port = addr.rpartition(":")
    try:
        return host or "127.0.0.1", int(port)
    except ValueError:
        raise ValidationError(f"bad listen address {addr!r}; expected host:port") from None


def make_server(engine: SliceEngine, addr: Optional[str] = None) -> ThreadingHTTPServer:
    """Bind (but do not start) an HTTP server for ``engine``. Port 0 picks a free port."""
    handler = type("SliceHandler", (_Handler,), {"api": SliceApi(engine)})
    return ThreadingHTTPServer(parse_addr(addr), handler)


def serve(engine: SliceEngine, addr: Optional[str] = None) -> None:
    server = make_server(engine, addr)
    host, port = server.server_address[:2]
    log.info("slice management API listening on http://%s:%d", host, port)
    try:
        server.serve_forever()
    finally:
        server.server_close()
