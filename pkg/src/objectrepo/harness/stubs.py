"""Deterministic stub services standing in for external behavior mechanisms.

Every stub applies a pure byte transform to content it pulls from the
``src`` URL handed to it, so dissemination results can be checked by byte
algebra. Served paths:

    watermarker   GET /wm?src=U&msg=T      -> b"WM[" + T + b"]" + fetch(U)
    resizer       GET /resize?src=U&size=N -> fetch(U)[:N]   (N defaults 64)
    echo          GET /echo?src=U          -> fetch(U) unchanged

``StaticContentServer`` plays the remote content source for external
datastreams. Both record every request they serve for assertions.
"""

from __future__ import annotations

import threading
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qsl, urlsplit

DEFAULT_STUB_PORTS = {"echo": 9041, "resizer": 9042, "watermarker": 9043}
_FETCH_TIMEOUT = 10.0


def _fetch(url: str) -> tuple[str, bytes]:
    with urllib.request.urlopen(url, timeout=_FETCH_TIMEOUT) as response:
        mime = response.headers.get("Content-Type",
                                    "application/octet-stream")
        return mime.split(";")[0].strip(), response.read()


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, format, *args):
        pass

    def do_GET(self):
        parts = urlsplit(self.path)
        params = dict(parse_qsl(parts.query, keep_blank_values=True))
        self.server.log.append((parts.path, params))
        route = self.server.routes.get(parts.path)
        if route is None:
            self._reply(404, "text/plain", b"no such path")
            return
        try:
            mime, body = route(params)
        except Exception:
            self._reply(502, "text/plain", b"upstream fetch failed")
            return
        self._reply(200, mime, body)

    def _reply(self, status: int, mime: str, body: bytes):
        self.send_response(status)
        self.send_header("Content-Type", mime)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class _StubBase:
    def __init__(self, port: int = 0):
        self._server = ThreadingHTTPServer(("127.0.0.1", port), _Handler)
        self._server.daemon_threads = True
        self._server.routes = self.routes()
        self._server.log = []
        self._thread = threading.Thread(
            target=lambda: self._server.serve_forever(poll_interval=0.05),
            daemon=True)

    def routes(self):
        raise NotImplementedError

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    @property
    def log(self) -> list[tuple[str, dict]]:
        return self._server.log

    def start(self):
        self._thread.start()
        return self

    def stop(self):
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


class StubService(_StubBase):
    """One of the three named transform stubs."""

    TRANSFORMS = ("watermarker", "resizer", "echo")

    def __init__(self, name: str, port: int = 0):
        if name not in self.TRANSFORMS:
            raise ValueError(f"unknown stub {name!r}")
        self.name = name
        super().__init__(port)

    def routes(self):
        return {
            "watermarker": {"/wm": self._watermark},
            "resizer": {"/resize": self._resize},
            "echo": {"/echo": self._echo},
        }[self.name]

    def _watermark(self, params):
        mime, data = _fetch(params["src"])
        text = params.get("msg", "")
        return mime, b"WM[" + text.encode("utf-8") + b"]" + data

    def _resize(self, params):
        mime, data = _fetch(params["src"])
        size = int(params.get("size", "64"))
        return mime, data[:size]

    def _echo(self, params):
        mime, data = _fetch(params["src"])
        return mime, data


def run_stub(name: str, port: int = 0) -> StubService:
    """Start a named stub; raises OSError if the port is taken."""
    return StubService(name, port).start()


class StaticContentServer(_StubBase):
    """Remote content source double: serves registered paths verbatim."""

    def __init__(self, port: int = 0):
        self._content: dict[str, tuple[str, bytes]] = {}
        super().__init__(port)

    def routes(self):
        return _StaticRoutes(self)

    def add(self, path: str, mime: str, data: bytes) -> str:
        """Register content; returns its absolute URL."""
        if not path.startswith("/"):
            path = "/" + path
        self._content[path] = (mime, data)
        return self.base_url + path


class _StaticRoutes:
    def __init__(self, server: StaticContentServer):
        self._server = server

    def get(self, path):
        entry = self._server._content.get(path)
        if entry is None:
            return None
        return lambda params, entry=entry: entry
