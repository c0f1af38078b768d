"""Build HTTP requests from parameter assignments and execute them."""
from __future__ import annotations

import http.client
import json
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple
from urllib.parse import quote, urlencode, urlsplit

from .errors import MissingPathParameter, UnsendableRequest
from .model import OperationSpec


@dataclass(frozen=True)
class RequestPlan:
    operation: str
    verb: str
    url: str
    headers: Tuple[Tuple[str, str], ...] = ()
    body: Optional[bytes] = None
    media_type: Optional[str] = None


@dataclass
class CallRecord:
    plan: RequestPlan
    status: Optional[int] = None
    transport_error: Optional[str] = None
    response_headers: Tuple[Tuple[str, str], ...] = ()
    response_body: bytes = b""
    json_body: Any = None
    is_json: bool = False
    latency_ms: float = 0.0
    timestamp: float = 0.0
    context: Dict[str, Any] = field(default_factory=dict)
    truncated: bool = False

    @property
    def operation(self) -> str:
        return self.plan.operation


def _reject_constant(name: str):
    raise ValueError(f"{name} is not JSON")


def parse_json(data: bytes) -> Any:
    """Strict JSON parse: NaN and Infinity are rejected like any other non-JSON text."""
    return json.loads(data, parse_constant=_reject_constant)


def render_scalar(value: Any) -> str:
    """Strings go out verbatim, everything else as compact JSON."""
    if isinstance(value, str):
        return value
    return json.dumps(value, separators=(",", ":"), ensure_ascii=False)


def _render_collection(value: Any) -> str:
    if isinstance(value, list):
        return ",".join(render_scalar(v) for v in value)
    return render_scalar(value)


def _header_value(name: str, value: str) -> str:
    if any(c in value for c in "\r\n\x00"):
        raise UnsendableRequest(f"header {name!r} contains a line break or NUL")
    if any(ord(c) > 255 for c in value):
        return value.encode("utf-8").decode("latin-1")
    return value


def build_request(op: OperationSpec, assignment, base_url: str) -> RequestPlan:
    """Place each parameter value where its location says it belongs."""
    values = assignment if isinstance(assignment, dict) else assignment.values
    path = op.path_template
    query: List[Tuple[str, str]] = []
    headers: List[Tuple[str, str]] = []
    form: List[Tuple[str, str]] = []
    body = media = None

    for key, p in op.param_keys().items():
        if key not in values:
            if p.location == "path":
                raise MissingPathParameter(f"path parameter {p.name!r} omitted")
            continue
        v = values[key]
        if p.location == "path":
            path = path.replace("{" + p.name + "}", quote(_render_collection(v), safe=""))
        elif p.location == "query":
            if isinstance(v, list) and p.collection_format == "multi":
                query.extend((p.name, render_scalar(x)) for x in v)
            else:
                query.append((p.name, _render_collection(v)))
        elif p.location == "header":
            headers.append((p.name, _header_value(p.name, _render_collection(v))))
        elif p.location == "form":
            if isinstance(v, list) and p.collection_format == "multi":
                form.extend((p.name, render_scalar(x)) for x in v)
            else:
                form.append((p.name, _render_collection(v)))
        else:
            body = json.dumps(v, ensure_ascii=False).encode("utf-8")
            media = "application/json"

    if form:
        body = urlencode(form, quote_via=quote).encode("ascii")
        media = "application/x-www-form-urlencoded"
    if media:
        headers.append(("Content-Type", media))
    url = base_url.rstrip("/") + path
    if query:
        url += "?" + urlencode(query, quote_via=quote, safe="")
    return RequestPlan(op.id, op.verb, url, tuple(headers), body, media)


@dataclass(frozen=True)
class ClientConfig:
    timeout: float = 10.0
    auth_header: Optional[str] = None  # "Name: value"


class HttpClient:
    """Keep-alive HTTP client; one connection per (thread, host)."""

    def __init__(self, cfg: Optional[ClientConfig] = None):
        self.cfg = cfg or ClientConfig()
        self._local = threading.local()
        self._auth = None
        if self.cfg.auth_header:
            name, sep, value = self.cfg.auth_header.partition(":")
            if not sep or not name.strip():
                raise ValueError("auth header must look like 'Name: value'")
            self._auth = (name.strip(), value.strip())

    def _conn(self, scheme: str, netloc: str):
        pool = getattr(self._local, "pool", None)
        if pool is None:
            pool = self._local.pool = {}
        key = (scheme, netloc)
        conn = pool.get(key)
        fresh = conn is None
        if fresh:
            cls = http.client.HTTPSConnection if scheme == "https" else http.client.HTTPConnection
            conn = pool[key] = cls(netloc, timeout=self.cfg.timeout)
        return conn, fresh

    def _drop(self, scheme: str, netloc: str) -> None:
        conn = self._local.pool.pop((scheme, netloc), None)
        if conn is not None:
            conn.close()

    def close(self) -> None:
        for conn in getattr(self._local, "pool", {}).values():
            conn.close()
        self._local.pool = {}

    def execute(self, plan: RequestPlan, context: Optional[Dict[str, Any]] = None) -> CallRecord:
        parts = urlsplit(plan.url)
        target = parts.path or "/"
        if parts.query:
            target += "?" + parts.query
        headers = {"Accept": "application/json"}
        headers.update(plan.headers)
        if self._auth:
            headers[self._auth[0]] = self._auth[1]

        record = CallRecord(plan, context=dict(context or {}))
        record.timestamp = time.time()
        start = time.perf_counter()
        for attempt in range(2):
            conn, fresh = self._conn(parts.scheme, parts.netloc)
            try:
                conn.request(plan.verb, target, body=plan.body, headers=headers)
                resp = conn.getresponse()
                body = resp.read()
            except (http.client.RemoteDisconnected, BrokenPipeError, ConnectionResetError) as exc:
                self._drop(parts.scheme, parts.netloc)
                if not fresh and attempt == 0:
                    continue  # stale keep-alive connection, nothing was exchanged
                record.transport_error = f"connection error: {exc.__class__.__name__}"
                break
            except socket.timeout:
                self._drop(parts.scheme, parts.netloc)
                record.transport_error = "timeout"
                break
            except ConnectionRefusedError:
                self._drop(parts.scheme, parts.netloc)
                record.transport_error = "connection refused"
                break
            except (OSError, http.client.HTTPException) as exc:
                self._drop(parts.scheme, parts.netloc)
                record.transport_error = f"connection error: {exc}"
                break
            record.status = resp.status
            record.response_headers = tuple(resp.getheaders())
            record.response_body = body
            if resp.will_close:
                self._drop(parts.scheme, parts.netloc)
            break
        record.latency_ms = (time.perf_counter() - start) * 1000.0
        if record.response_body:
            try:
                record.json_body = parse_json(record.response_body)
                record.is_json = True
            except ValueError:
                pass
        return record


def execute(plan: RequestPlan, client) -> CallRecord:
    """Run one exchange; ``client`` is an :class:`HttpClient` or a :class:`ClientConfig`."""
    if isinstance(client, ClientConfig):
        c = HttpClient(client)
        try:
            return c.execute(plan)
        finally:
            c.close()
    return client.execute(plan)
