"""Minimal threaded HTTP scaffolding shared by the package's servers.

Routes are (method, compiled path regex, handler). Handlers receive a
Request and return a Response; a Response may instead carry a ``stream``
callable that writes the body itself (used for the live event channel).
"""

from __future__ import annotations

import json
import logging
import re
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import BinaryIO, Callable
from urllib.parse import parse_qs, urlparse

log = logging.getLogger(__name__)


@dataclass
class Request:
    method: str
    path: str
    query: dict[str, str]
    headers: dict[str, str]
    body: bytes
    path_params: dict[str, str] = field(default_factory=dict)

    def json(self) -> dict:
        try:
            doc = json.loads(self.body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise BadRequest(f"request body is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise BadRequest("request body must be a JSON object")
        return doc


@dataclass
class Response:
    status: int = 200
    body: dict | list | None = None
    stream: Callable[[BinaryIO], None] | None = None
    content_type: str = "application/json"
    raw: bytes | None = None


class BadRequest(Exception):
    pass


class ChunkedWriter:
    """Chunked-transfer writer handed to stream handlers.

    Chunking matters: without it, buffering HTTP clients sit on small
    server-sent events until enough bytes accumulate.
    """

    def __init__(self, wfile: BinaryIO):
        self._wfile = wfile

    def write(self, data: bytes) -> None:
        if not data:
            return
        self._wfile.write(f"{len(data):X}\r\n".encode("ascii"))
        self._wfile.write(data)
        self._wfile.write(b"\r\n")

    def flush(self) -> None:
        self._wfile.flush()

    def close(self) -> None:
        self._wfile.write(b"0\r\n\r\n")
        self._wfile.flush()


class Router:
    def __init__(self):
        self._routes: list[tuple[str, re.Pattern, Callable[[Request], Response]]] = []
        self.fallback: Callable[[Request], Response] | None = None

    def add(self, method: str, pattern: str, handler: Callable[[Request], Response]) -> None:
        """Register a handler; ``{name}`` in the pattern captures a segment."""
        regex = re.sub(r"\{(\w+)\}", r"(?P<\1>[^/]+)", pattern)
        self._routes.append((method.upper(), re.compile(f"^{regex}$"), handler))

    def dispatch(self, request: Request) -> Response:
        matched_path = False
        for method, regex, handler in self._routes:
            match = regex.match(request.path)
            if not match:
                continue
            matched_path = True
            if method != request.method:
                continue
            request.path_params = match.groupdict()
            return handler(request)
        if matched_path:
            return Response(405, {"error": f"method {request.method} not allowed"})
        if self.fallback is not None:
            return self.fallback(request)
        return Response(404, {"error": f"no route for {request.path}"})


class HttpServer:
    """ThreadingHTTPServer wrapper with start/stop and a request counter."""

    def __init__(self, router: Router, host: str = "127.0.0.1", port: int = 0):
        self.router = router
        self.request_count = 0
        outer = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):  # route through logging, not stderr
                log.debug("%s %s", self.address_string(), fmt % args)

            def _handle(self):
                outer.request_count += 1
                length = int(self.headers.get("Content-Length") or 0)
                body = self.rfile.read(length) if length else b""
                parsed = urlparse(self.path)
                query = {k: v[0] for k, v in parse_qs(parsed.query).items()}
                request = Request(
                    method=self.command,
                    path=parsed.path,
                    query=query,
                    headers={k: v for k, v in self.headers.items()},
                    body=body,
                )
                try:
                    response = outer.router.dispatch(request)
                except BadRequest as exc:
                    response = Response(400, {"error": str(exc)})
                except Exception as exc:  # noqa: BLE001 - surface as 500, keep server alive
                    log.exception("handler failed for %s %s", request.method, request.path)
                    response = Response(500, {"error": f"{type(exc).__name__}: {exc}"})
                self._write(response)

            def _write(self, response: Response):
                if response.stream is not None:
                    self.send_response(response.status)
                    self.send_header("Content-Type", response.content_type)
                    self.send_header("Cache-Control", "no-store")
                    self.send_header("Transfer-Encoding", "chunked")
                    self.send_header("Connection", "close")
                    self.end_headers()
                    writer = ChunkedWriter(self.wfile)
                    try:
                        response.stream(writer)
                        writer.close()
                    except (BrokenPipeError, ConnectionResetError):
                        pass
                    self.close_connection = True
                    return
                if response.raw is not None:
                    payload = response.raw
                else:
                    payload = json.dumps(
                        response.body if response.body is not None else {}
                    ).encode("utf-8")
                self.send_response(response.status)
                self.send_header("Content-Type", response.content_type)
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            do_GET = do_POST = do_PUT = do_DELETE = _handle

        self._server = ThreadingHTTPServer((host, port), Handler)
        self._server.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> None:
        if self._thread is not None:
            return
        self._thread = threading.Thread(
            target=self._server.serve_forever, kwargs={"poll_interval": 0.1}, daemon=True
        )
        self._thread.start()

    def stop(self) -> None:
        if self._thread is None:
            return
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5.0)
        self._thread = None
