"""User-domain HTTP API.

All bodies JSON (UTF-8); ``/stream`` is a server-push feed of one JSON object
per line (thing events, mission transitions, estimate updates) and is what
the dashboard consumes. The backend object supplies snapshots and accepts
commands; this layer only speaks HTTP.
"""

from __future__ import annotations

import json
import mimetypes
import os
import queue
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

STREAM_HEARTBEAT_S = 2.0


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def make_api_server(backend, host: str, port: int, ui_dir: str | None = None):
    """backend duck type:
    things(), thing(id), missions_list(), mission(id), post_mission(body),
    estimates(), sync_metrics(), kpi(from,to), post_interlock(body),
    subscribe_stream(put) -> unsubscribe, gateway_metrics_text() -> str|None
    """

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            pass

        # -- plumbing ----------------------------------------------------------

        def _json(self, payload, status: int = 200):
            body = json.dumps(payload, sort_keys=True).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _text(self, text: str, status: int = 200, content_type: str = "text/plain"):
            body = text.encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", f"{content_type}; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _body(self) -> dict:
            length = int(self.headers.get("Content-Length", "0") or 0)
            if length == 0:
                return {}
            try:
                return json.loads(self.rfile.read(length).decode("utf-8"))
            except (json.JSONDecodeError, UnicodeDecodeError):
                raise ApiError(400, "body must be JSON") from None

        # -- routes -------------------------------------------------------------

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self):
            try:
                self._route_get()
            except ApiError as err:
                self._json({"error": err.message}, err.status)
            except (BrokenPipeError, ConnectionResetError):
                pass

        def do_POST(self):
            try:
                self._route_post()
            except ApiError as err:
                self._json({"error": err.message}, err.status)
            except (BrokenPipeError, ConnectionResetError):
                pass

        def _route_get(self):
            url = urlparse(self.path)
            parts = [p for p in url.path.split("/") if p]
            if url.path == "/stream":
                self._stream()
            elif url.path == "/things":
                self._json({"things": backend.things()})
            elif len(parts) == 2 and parts[0] == "things":
                thing = backend.thing(parts[1])
                if thing is None:
                    raise ApiError(404, f"no thing {parts[1]!r}")
                self._json(thing)
            elif url.path == "/missions":
                self._json({"missions": backend.missions_list()})
            elif len(parts) == 2 and parts[0] == "missions":
                record = backend.mission(_int(parts[1], "mission id"))
                if record is None:
                    raise ApiError(404, "UnknownMission")
                self._json(record)
            elif url.path == "/estimates":
                self._json(backend.estimates())
            elif url.path == "/metrics/sync":
                self._json(backend.sync_metrics())
            elif url.path == "/metrics":
                text = backend.gateway_metrics_text()
                if text is None:
                    raise ApiError(404, "no gateway here")
                self._text(text)
            elif url.path == "/kpi":
                params = parse_qs(url.query)
                start = _int(params.get("from", ["0"])[0], "from")
                end = _int(params.get("to", ["0"])[0], "to")
                self._json(backend.kpi(start, end))
            elif url.path == "/" or url.path == "/ui":
                self._redirect("/ui/")
            elif url.path.startswith("/ui/"):
                self._static(url.path[len("/ui/"):] or "index.html")
            else:
                raise ApiError(404, f"no route {url.path}")

        def _route_post(self):
            url = urlparse(self.path)
            if url.path == "/missions":
                self._json(backend.post_mission(self._body()), 201)
            elif url.path == "/interlocks":
                self._json(backend.post_interlock(self._body()))
            else:
                raise ApiError(404, f"no route {url.path}")

        def _redirect(self, target: str):
            self.send_response(302)
            self.send_header("Location", target)
            self.send_header("Content-Length", "0")
            self.end_headers()

        def _static(self, rel: str):
            if ui_dir is None:
                raise ApiError(404, "no UI bundled")
            path = os.path.realpath(os.path.join(ui_dir, rel))
            if not path.startswith(os.path.realpath(ui_dir)) or not os.path.isfile(path):
                raise ApiError(404, "not found")
            ctype = mimetypes.guess_type(path)[0] or "application/octet-stream"
            with open(path, "rb") as fh:
                body = fh.read()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _stream(self):
            events: queue.Queue = queue.Queue(maxsize=4096)

            def put(event: dict):
                try:
                    events.put_nowait(event)
                except queue.Full:
                    pass

            unsubscribe = backend.subscribe_stream(put)
            self.send_response(200)
            self.send_header("Content-Type", "application/x-ndjson; charset=utf-8")
            self.send_header("Cache-Control", "no-store")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Transfer-Encoding", "chunked")
            self.end_headers()

            def write_line(payload: dict):
                line = json.dumps(payload, sort_keys=True).encode("utf-8") + b"\n"
                chunk = f"{len(line):x}\r\n".encode() + line + b"\r\n"
                self.wfile.write(chunk)
                self.wfile.flush()

            try:
                write_line({"type": "hello", "stream": "twinline"})
                while True:
                    try:
                        event = events.get(timeout=STREAM_HEARTBEAT_S)
                    except queue.Empty:
                        event = {"type": "ping"}
                    write_line(event)
            except (BrokenPipeError, ConnectionResetError, OSError):
                pass
            finally:
                unsubscribe()

    server = ThreadingHTTPServer((host, port), Handler)
    server.daemon_threads = True
    return server


def _int(text: str, label: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ApiError(400, f"{label} must be an integer") from None


class ApiServer:
    def __init__(self, backend, host: str = "127.0.0.1", port: int = 8470,
                 ui_dir: str | None = None):
        self.server = make_api_server(backend, host, port, ui_dir)
        self.port = self.server.server_address[1]
        self.host = host
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def address(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self):
        self._thread.start()
        return self

    def stop(self):
        self.server.shutdown()
        self.server.server_close()
