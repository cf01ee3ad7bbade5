"""Outward NDJSON stream service and browser tap.

Tails the telemetry bus to any number of TCP clients, one JSON message per
line, and accepts operator command lines back. A bounded per-client queue
keeps slow readers from ever stalling the simulation: when a client falls
behind its backpressure budget it is disconnected. The optional HTTP tap
exposes the same stream to browsers as server-sent events plus a POST
endpoint for commands, and serves the operator console's static files.
"""

from __future__ import annotations

import json
import queue
import socket as _socket
import socketserver
import threading
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable

from .bus import TelemetryBus
from .errors import SchemaError

DEFAULT_BACKPRESSURE_BUDGET = 10_000


CommandSink = Callable[[str, str, str], str | None]
"""(action, valve_id, operator_id) -> rejection reason or None when accepted."""


def parse_command_line(line: str, known_valves: set[str] | None) -> dict:
    """Validate one inbound client line; returns the command payload."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or obj.get("kind") != "command":
        raise SchemaError("client lines must be command messages")
    payload = obj.get("payload")
    if not isinstance(payload, dict):
        raise SchemaError("command payload must be an object")
    missing = {"action", "valve_id", "operator_id"} - set(payload)
    if missing:
        raise SchemaError(f"command payload missing {sorted(missing)}")
    if payload["action"] not in ("open", "close"):
        raise SchemaError(f"unknown action {payload['action']!r}")
    if known_valves is not None and payload["valve_id"] not in known_valves:
        raise SchemaError(f"unknown valve id {payload['valve_id']!r}")
    return payload


class _ClientQueue:
    """Bounded line queue; None is the disconnect sentinel.

    ``on_drop`` must be non-blocking; it force-closes the connection so a
    writer thread stuck on a full socket buffer gets unstuck.
    """

    def __init__(self, budget: int):
        self.q: "queue.Queue[str | None]" = queue.Queue(maxsize=budget)
        self.dropped = False
        self.on_drop: Callable[[], None] | None = None

    def offer(self, line: str) -> None:
        if self.dropped:
            return
        try:
            self.q.put_nowait(line)
        except queue.Full:
            self.dropped = True
            if self.on_drop is not None:
                try:
                    self.on_drop()
                except OSError:
                    pass


class StreamService:
    """TCP NDJSON fan-out bound to one bus.

    Every published bus message is sent to every connected client in publish
    order. Inbound lines are parsed and validated; good commands go to the
    command sink (the simulation's ingress queue), bad ones get an error
    reply on the same connection.
    """

    def __init__(
        self,
        bus: TelemetryBus,
        command_sink: CommandSink,
        *,
        known_valves: set[str] | None = None,
        backpressure_budget: int = DEFAULT_BACKPRESSURE_BUDGET,
    ):
        self.bus = bus
        self.command_sink = command_sink
        self.known_valves = known_valves
        self.budget = backpressure_budget
        self._clients: list[_ClientQueue] = []
        self._lock = threading.Lock()
        self._server: socketserver.ThreadingTCPServer | None = None
        self._thread: threading.Thread | None = None
        bus.add_tap(self._on_message)

    # -- bus side (simulation thread; must never block) --------------------

    def _on_message(self, msg: dict, line: str) -> None:
        with self._lock:
            clients = list(self._clients)
        for client in clients:
            client.offer(line)
            if client.dropped:
                self._detach(client)

    def _attach(self) -> _ClientQueue:
        client = _ClientQueue(self.budget)
        with self._lock:
            self._clients.append(client)
        return client

    def _detach(self, client: _ClientQueue) -> None:
        with self._lock:
            if client in self._clients:
                self._clients.remove(client)

    # -- network side --------------------------------------------------------

    def serve(self, port: int = 0, host: str = "127.0.0.1") -> tuple[str, int]:
        service = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):  # noqa: N802
                client = service._attach()
                client.on_drop = lambda: self.connection.shutdown(_socket.SHUT_RDWR)
                stop = threading.Event()

                def writer():
                    try:
                        while not stop.is_set():
                            try:
                                line = client.q.get(timeout=0.2)
                            except queue.Empty:
                                if client.dropped:
                                    break
                                continue
                            if line is None:
                                break
                            self.wfile.write(line.encode("utf-8"))
                            self.wfile.flush()
                            if client.dropped:
                                break
                    except OSError:
                        pass
                    finally:
                        stop.set()

                wt = threading.Thread(target=writer, daemon=True)
                wt.start()
                try:
                    while not stop.is_set():
                        raw = self.rfile.readline()
                        if not raw:
                            break
                        text = raw.decode("utf-8", errors="replace").strip()
                        if not text:
                            continue
                        reply = service._handle_command_line(text)
                        if reply is not None:
                            self.wfile.write((reply + "\n").encode("utf-8"))
                            self.wfile.flush()
                except OSError:
                    pass
                finally:
                    stop.set()
                    service._detach(client)

        server = socketserver.ThreadingTCPServer((host, port), Handler, bind_and_activate=True)
        server.daemon_threads = True
        self._server = server
        self._thread = threading.Thread(target=server.serve_forever, daemon=True)
        self._thread.start()
        return server.server_address[0], server.server_address[1]

    def _handle_command_line(self, text: str) -> str | None:
        try:
            payload = parse_command_line(text, self.known_valves)
        except SchemaError as exc:
            return json.dumps({"kind": "error", "error": str(exc)}, sort_keys=True)
        rejection = self.command_sink(
            payload["action"], payload["valve_id"], payload["operator_id"]
        )
        if rejection:
            return json.dumps({"kind": "error", "error": rejection}, sort_keys=True)
        return json.dumps({"kind": "ack", "valve_id": payload["valve_id"]}, sort_keys=True)

    def close(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None


def serve_stream(
    port: int,
    bus: TelemetryBus,
    command_sink: CommandSink,
    *,
    known_valves: set[str] | None = None,
    backpressure_budget: int = DEFAULT_BACKPRESSURE_BUDGET,
) -> StreamService:
    """Start the NDJSON stream service; returns the running handle."""
    service = StreamService(
        bus,
        command_sink,
        known_valves=known_valves,
        backpressure_budget=backpressure_budget,
    )
    service.serve(port=port)
    return service


class HttpTap:
    """Browser transport: GET /stream as SSE, POST /command, static console."""

    def __init__(
        self,
        bus: TelemetryBus,
        command_sink: CommandSink,
        *,
        known_valves: set[str] | None = None,
        static_dir: Path | None = None,
        backpressure_budget: int = DEFAULT_BACKPRESSURE_BUDGET,
    ):
        self.bus = bus
        self.command_sink = command_sink
        self.known_valves = known_valves
        self.static_dir = static_dir
        self.budget = backpressure_budget
        self._clients: list[_ClientQueue] = []
        self._lock = threading.Lock()
        self._server: ThreadingHTTPServer | None = None
        bus.add_tap(self._on_message)

    def _on_message(self, msg: dict, line: str) -> None:
        with self._lock:
            clients = list(self._clients)
        for client in clients:
            client.offer(line)
            if client.dropped:
                with self._lock:
                    if client in self._clients:
                        self._clients.remove(client)

    def serve(self, port: int = 0, host: str = "127.0.0.1") -> tuple[str, int]:
        tap = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, *args):  # quiet
                pass

            def do_GET(self):  # noqa: N802
                if self.path == "/stream":
                    self._serve_sse()
                    return
                self._serve_static()

            def _serve_sse(self):
                client = _ClientQueue(tap.budget)
                client.on_drop = lambda: self.connection.shutdown(_socket.SHUT_RDWR)
                with tap._lock:
                    tap._clients.append(client)
                try:
                    self.send_response(HTTPStatus.OK)
                    self.send_header("Content-Type", "text/event-stream")
                    self.send_header("Cache-Control", "no-store")
                    self.end_headers()
                    while True:
                        try:
                            line = client.q.get(timeout=1.0)
                        except queue.Empty:
                            if client.dropped:
                                break
                            self.wfile.write(b": keepalive\n\n")
                            self.wfile.flush()
                            continue
                        if line is None:
                            break
                        self.wfile.write(b"data: " + line.strip().encode("utf-8") + b"\n\n")
                        self.wfile.flush()
                        if client.dropped:
                            break
                except OSError:
                    pass
                finally:
                    with tap._lock:
                        if client in tap._clients:
                            tap._clients.remove(client)

            def _serve_static(self):
                root = tap.static_dir
                name = "index.html" if self.path in ("/", "") else self.path.lstrip("/")
                if root is None or ".." in name:
                    self.send_error(HTTPStatus.NOT_FOUND)
                    return
                target = root / name
                if not target.is_file():
                    self.send_error(HTTPStatus.NOT_FOUND)
                    return
                body = target.read_bytes()
                ctype = {
                    ".html": "text/html; charset=utf-8",
                    ".js": "text/javascript; charset=utf-8",
                    ".css": "text/css; charset=utf-8",
                }.get(target.suffix, "application/octet-stream")
                self.send_response(HTTPStatus.OK)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_POST(self):  # noqa: N802
                if self.path != "/command":
                    self.send_error(HTTPStatus.NOT_FOUND)
                    return
                length = int(self.headers.get("Content-Length", "0"))
                text = self.rfile.read(length).decode("utf-8", errors="replace")
                try:
                    payload = parse_command_line(text, tap.known_valves)
                except SchemaError as exc:
                    body = json.dumps({"kind": "error", "error": str(exc)}).encode()
                    self.send_response(HTTPStatus.BAD_REQUEST)
                else:
                    rejection = tap.command_sink(
                        payload["action"], payload["valve_id"], payload["operator_id"]
                    )
                    if rejection:
                        body = json.dumps({"kind": "error", "error": rejection}).encode()
                        self.send_response(HTTPStatus.CONFLICT)
                    else:
                        body = json.dumps(
                            {"kind": "ack", "valve_id": payload["valve_id"]}
                        ).encode()
                        self.send_response(HTTPStatus.OK)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

        server = ThreadingHTTPServer((host, port), Handler)
        server.daemon_threads = True
        self._server = server
        threading.Thread(target=server.serve_forever, daemon=True).start()
        return server.server_address[0], server.server_address[1]

    def close(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None
