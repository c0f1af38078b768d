"""Fixture service.

Planted behaviour, each reachable through the bundled OpenAPI document:

* ``GET /objects?q=`` answers 500 when ``q`` holds anything but ASCII letters
  and digits (string input-validation bug), 400 when ``q`` is missing.
* ``GET /items/{n}`` answers 500 for ``n <= 0`` (integer input-validation bug).
* ``POST /objects`` answers 201 for names of at least 8 ASCII letters or
  digits, 500 for names with a code point above 127 and 400 otherwise.
* ``POST /resources``, ``DELETE /resources/{id}``, ``PUT /resources/{id}``:
  editing a deleted resource answers 500 (stateful bug).
* ``GET /teapot`` answers 418, which the document does not list.
* ``GET /badbody`` answers 200 with a body missing a required field.

``POST /reset`` wipes all state and ``GET /slow?ms=`` sleeps before answering;
neither is part of the document. With ``planted=False`` every bug above is
replaced by a documented answer, which gives a clean target.
"""
from __future__ import annotations

import argparse
import copy
import json
import re
import threading
import time
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from importlib import resources
from typing import Any, Dict, Optional, Tuple
from urllib.parse import parse_qs, unquote, urlsplit

_ALNUM = re.compile(r"[A-Za-z0-9]*")
_VALID_NAME = re.compile(r"[A-Za-z0-9]{8,}")
_INT = re.compile(r"-?[0-9]+")
_ID_NAMESPACE = uuid.UUID("8f5e1d36-3c57-4b8e-9a43-0b7f4c1f2a90")


def fixture_document(host: Optional[str] = None) -> Dict[str, Any]:
    """The bundled OpenAPI document, optionally pointed at ``host``."""
    text = resources.files(__package__).joinpath("swagger.json").read_text("utf-8")
    doc = json.loads(text)
    if host:
        doc["host"] = host
    return doc


def _error(status: int, message: str) -> Tuple[int, Any]:
    return status, {"message": message}


class FixtureService:
    """Routing and state, independent of the HTTP transport."""

    def __init__(self, planted: bool = True):
        self.planted = planted
        self._lock = threading.Lock()
        self.reset()

    def reset(self) -> None:
        self.objects: Dict[str, Dict[str, Any]] = {}
        self.resources: Dict[str, Dict[str, Any]] = {}
        self.deleted: set = set()
        self._counter = 0

    def _next_id(self) -> str:
        self._counter += 1
        return str(uuid.uuid5(_ID_NAMESPACE, str(self._counter)))

    def handle(self, method: str, path: str, query: Dict[str, list],
               body: bytes) -> Tuple[int, Any]:
        """Return ``(status, json_body_or_None)`` for one request."""
        segments = [unquote(s, errors="replace") for s in path.split("/")[1:]]
        with self._lock:
            return self._route(method, segments, query, body)

    def _route(self, method, seg, query, body):
        if seg == ["objects"]:
            if method == "GET":
                return self.search_objects(query)
            if method == "POST":
                return self.create_object(body)
        elif len(seg) == 2 and seg[0] == "objects" and method == "GET":
            obj = self.objects.get(seg[1])
            return (200, copy.deepcopy(obj)) if obj else _error(404, "no such object")
        elif len(seg) == 2 and seg[0] == "items" and method == "GET":
            if not _INT.fullmatch(seg[1]):
                return _error(400, "n must be an integer")
            n = int(seg[1])
            if n <= 0:
                return _error(500 if self.planted else 400, "n must be positive")
            return 200, {"n": n}
        elif seg == ["resources"] and method == "POST":
            return self.create_resource(body)
        elif len(seg) == 2 and seg[0] == "resources":
            if method == "DELETE":
                return self.delete_resource(seg[1])
            if method == "PUT":
                return self.edit_resource(seg[1], body)
        elif seg == ["teapot"] and method == "GET":
            if not self.planted:
                return 200, {"message": "tea"}
            return 418, {"message": "I'm a teapot"}
        elif seg == ["badbody"] and method == "GET":
            if not self.planted:
                return 200, {"id": str(_ID_NAMESPACE), "name": "named"}
            return 200, {"name": "nameless"}
        elif seg == ["reset"] and method == "POST":
            self.reset()
            return 204, None
        return _error(404, "no route")

    def search_objects(self, query):
        if "q" not in query:
            return _error(400, "q is required")
        q = query["q"][0]
        if self.planted and not _ALNUM.fullmatch(q):
            return _error(500, "internal error")
        hits = [self.objects[k] for k in sorted(self.objects) if q in self.objects[k]["name"]]
        return 200, copy.deepcopy(hits)

    def create_object(self, body):
        obj = _json_object(body)
        if obj is None or not isinstance(obj.get("name"), str) \
                or not isinstance(obj.get("id"), str):
            return _error(400, "name and id are required strings")
        name = obj["name"]
        if self.planted and any(ord(c) > 127 for c in name):
            return _error(500, "internal error")
        if not _VALID_NAME.fullmatch(name):
            return _error(400, "name must be at least 8 letters or digits")
        record = {"name": name, "id": obj["id"]}
        self.objects[obj["id"]] = record
        return 201, dict(record)

    def create_resource(self, body):
        obj = _json_object(body)
        if obj is None or not isinstance(obj.get("name"), str):
            return _error(400, "name is required")
        rid = self._next_id()
        self.resources[rid] = {"id": rid, "name": obj["name"]}
        return 201, dict(self.resources[rid])

    def delete_resource(self, rid):
        if rid not in self.resources:
            return _error(404, "no such resource")
        del self.resources[rid]
        self.deleted.add(rid)
        return 204, None

    def edit_resource(self, rid, body):
        if self.planted and rid in self.deleted:
            # planted: the edit path still dereferences the removed record
            return _error(500, "internal error")
        obj = _json_object(body)
        if obj is None or not isinstance(obj.get("name"), str):
            return _error(400, "name is required")
        if rid not in self.resources:
            return _error(404, "no such resource")
        self.resources[rid]["name"] = obj["name"]
        return 200, dict(self.resources[rid])


def _json_object(body: bytes) -> Optional[dict]:
    try:
        obj = json.loads(body)
    except ValueError:
        return None
    return obj if isinstance(obj, dict) else None


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "quickrest-fixture/1"
    disable_nagle_algorithm = True

    def log_message(self, format, *args):
        pass

    def _reply(self, status: int, payload: Any) -> None:
        data = b"" if payload is None else json.dumps(payload).encode("utf-8")
        self.send_response_only(status)
        self.send_header("Server", self.server_version)
        if payload is not None:
            self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self._headers_buffer.append(b"\r\n")
        self._headers_buffer.append(data)
        self.flush_headers()

    def _dispatch(self):
        parts = urlsplit(self.path)
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        if parts.path == "/swagger.json" and self.command == "GET":
            host = self.headers.get("Host") or "%s:%d" % self.server.server_address[:2]
            return self._reply(200, fixture_document(host))
        if parts.path == "/slow" and self.command == "GET":
            ms = parse_qs(parts.query).get("ms", ["1000"])[0]
            time.sleep(int(ms) / 1000.0 if ms.isdigit() else 1.0)
            return self._reply(200, {"message": "slow"})
        query = parse_qs(parts.query, keep_blank_values=True, errors="replace")
        status, payload = self.server.service.handle(self.command, parts.path, query, body)
        self._reply(status, payload)

    do_GET = do_POST = do_PUT = do_DELETE = do_PATCH = _dispatch

    def do_HEAD(self):
        self._reply(404, None)


class FixtureServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, host: str = "127.0.0.1", port: int = 0,
                 service: Optional[FixtureService] = None):
        super().__init__((host, port), _Handler)
        self.service = service or FixtureService()
        self._thread: Optional[threading.Thread] = None

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "FixtureServer":
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()


def serve(port: int = 0, host: str = "127.0.0.1", planted: bool = True) -> FixtureServer:
    """Start the fixture on a background thread and return the running server."""
    return FixtureServer(host, port, FixtureService(planted)).start()


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="Run the quickrest fixture service.")
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8080)
    ap.add_argument("--clean", action="store_true", help="serve without the planted bugs")
    args = ap.parse_args(argv)
    server = FixtureServer(args.host, args.port, FixtureService(planted=not args.clean))
    print(f"fixture listening on {server.url} (document at {server.url}/swagger.json)",
          flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
