"""JSON-over-HTTP front end for the router (stdlib threading server)."""

from __future__ import annotations

import json
import logging
import threading
import uuid
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any

from ..core import GatewayConfig, TaskKind
from .metrics import EvaluationError, MetricsAccumulator, query_from_record
from .router import GatewayClients, route_query

logger = logging.getLogger(__name__)

MAX_BODY_BYTES = 1 << 20


class _Handler(BaseHTTPRequestHandler):
    server: "GatewayServer"
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt: str, *args: Any) -> None:
        logger.info("%s " + fmt, self.address_string(), *args)

    def _send(self, status: int, payload: Any, content_type: str = "application/json") -> None:
        body = (payload if isinstance(payload, str) else json.dumps(payload)).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", f"{content_type}; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, kind: str, message: str) -> None:
        self._send(status, {"error": message, "kind": kind})

    def do_GET(self) -> None:
        if self.path == "/v1/health":
            self._send(200, "ok", "text/plain")
        elif self.path == "/v1/metrics":
            report = self.server.metrics.report()
            self._send(200, {"n": 0} if report is None else report.to_dict())
        else:
            self._error(404, "not_found", f"no route for GET {self.path}")

    def do_POST(self) -> None:
        if self.path != "/v1/answer":
            self._error(404, "not_found", f"no route for POST {self.path}")
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
        except ValueError:
            self._error(400, "bad_request", "invalid Content-Length")
            return
        if length <= 0 or length > MAX_BODY_BYTES:
            self._error(400, "bad_request", "request body missing or too large")
            return
        raw = self.rfile.read(length)
        try:
            data = json.loads(raw)
            if not isinstance(data, dict) or not isinstance(data.get("query"), str) or not data["query"].strip():
                raise ValueError("body must be a JSON object with a non-empty string 'query'")
            record = {"id": str(data.get("id") or uuid.uuid4().hex), "question": data["query"],
                      "answer": data.get("gold"), "task_kind": data.get("task_kind", TaskKind.FREE_FORM.value)}
            q = query_from_record(record)
        except (ValueError, EvaluationError) as exc:
            self._error(400, "bad_request", str(exc))
            return
        try:
            trace = route_query(q, self.server.config, self.server.clients)
        except Exception as exc:  # report instead of dropping the connection
            logger.exception("routing failed")
            self._error(500, "internal", f"{type(exc).__name__}: {exc}")
            return
        self.server.metrics.add(q, trace)
        level = None if trace.level is None else trace.level.name
        status = HTTPStatus.BAD_GATEWAY if trace.failed and level is None else HTTPStatus.OK
        self._send(int(status), {"answer": trace.answer, "level": level, "trace": trace.to_dict()})


class GatewayServer(ThreadingHTTPServer):
    daemon_threads = False  # shutdown joins in-flight request threads
    block_on_close = True

    def __init__(self, address: tuple[str, int], config: GatewayConfig, clients: GatewayClients):
        self.config = config
        self.clients = clients
        self.metrics = MetricsAccumulator()
        super().__init__(address, _Handler)

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, name="gateway-server", daemon=True)
        thread.start()
        return thread

    def stop(self) -> None:
        """Stop accepting requests, wait for in-flight ones, release the socket."""
        self.shutdown()
        self.server_close()


def make_server(config: GatewayConfig, clients: GatewayClients, host: str = "127.0.0.1",
                port: int = 8080) -> GatewayServer:
    """Bind the service; raises OSError when the address is unavailable."""
    return GatewayServer((host, port), config, clients)
