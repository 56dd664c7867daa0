"""HTTP exposure of the access and management APIs (GET/POST binding).

The server is a thin adapter: request parsing, the management token guard,
and error-to-status mapping. All behavior lives in the library modules.
Every error response carries the internal machine-readable error code.
Dissemination and datastream bodies are streamed (chunked), never buffered
whole.

Route table (see ``docs/api.md``)::

    GET    /wsdl
    GET    /access/{pid}/bdefs[?asOfDate=]
    GET    /access/{pid}/methods/{bdefPid}[?asOfDate=]
    GET    /access/{pid}/dissem/{bdefPid}/{method}?{userArgs}[&asOfDate=]
    GET    /get/{pid}/{dsid}[?asOfDate=]
    POST   /manage/ingest                              (token)
    POST   /manage/{pid}/datastreams/{dsid}            (token)
    PUT    /manage/{pid}/datastreams/{dsid}            (token)
    POST   /manage/{pid}/disseminators/{dissid}        (token)
    PUT    /manage/{pid}/disseminators/{dissid}        (token)
    DELETE /manage/{pid}                               (token)
    GET    /manage/{pid}/export                        (token)
    GET    /manage/{pid}/audit                         (token)
"""

from __future__ import annotations

import json
import logging
import re
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qsl, urlsplit

from . import model
from .access import AccessService
from .errors import RepositoryError
from .fetch import DEFAULT_SIZE_CAP, DEFAULT_TIMEOUT, HttpFetcher
from .management import ManagementService
from .model import ControlGroup, ObjectKind, Pid
from .servicedesc import DESCRIPTOR_NS
from .store import Repository
from .xmlout import Emitter

log = logging.getLogger(__name__)

STATUS_BY_CODE = {
    "PARSE_ERROR": 400,
    "BAD_TIMESTAMP": 400,
    "BAD_REQUEST": 400,
    "MISSING_BINDING_KEY": 400,
    "MISSING_REQUIRED_PARAM": 400,
    "UNAUTHORIZED": 401,
    "OBJECT_NOT_FOUND": 404,
    "COMPONENT_NOT_FOUND": 404,
    "CONTENT_NOT_FOUND": 404,
    "NO_VERSION_AT_TIME": 404,
    "NO_SUCH_SUBSCRIPTION": 404,
    "NO_SUCH_METHOD": 404,
    "NOT_FOUND": 404,
    "PID_COLLISION": 409,
    "DUPLICATE_COMPONENT": 409,
    "IN_USE": 409,
    "CLOCK_SKEW": 409,
    "STRUCTURAL_ERROR": 422,
    "INTEGRITY_ERROR": 422,
    "BINDING_INTEGRITY": 500,
    "DESCRIPTOR_ERROR": 500,
    "INVALID_OBJECT": 500,
    "STORAGE_ERROR": 500,
    "INTERNAL": 500,
    "EXTERNAL_FETCH": 502,
}


@dataclass
class ServerConfig:
    data_root: Path
    host: str = "127.0.0.1"
    port: int = 8080
    public_base_url: str | None = None  # defaults to http://host:port
    management_token: str | None = None  # None disables API-M
    fetch_timeout: float = DEFAULT_TIMEOUT
    size_cap: int = DEFAULT_SIZE_CAP
    default_namespace: str = "demo"
    fsync: bool = True

    def __post_init__(self):
        if self.public_base_url is not None and \
                not self.public_base_url.startswith(("http://", "https://")):
            raise ValueError("public base URL must be absolute")
        if self.management_token == "":
            raise ValueError("management token must be nonempty "
                             "(or None to disable management)")


class _ApiError(RepositoryError):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


_ROUTES = [
    ("GET", re.compile(r"^/wsdl$"), "wsdl"),
    ("GET", re.compile(r"^/access/(?P<pid>[^/]+)/bdefs$"), "bdefs"),
    ("GET", re.compile(r"^/access/(?P<pid>[^/]+)/methods/(?P<bdef>[^/]+)$"),
     "methods"),
    ("GET", re.compile(
        r"^/access/(?P<pid>[^/]+)/dissem/(?P<bdef>[^/]+)/(?P<method>[^/]+)$"),
     "dissem"),
    ("GET", re.compile(r"^/get/(?P<pid>[^/]+)/(?P<dsid>[^/]+)$"),
     "datastream"),
    ("POST", re.compile(r"^/manage/ingest$"), "ingest"),
    ("POST", re.compile(
        r"^/manage/(?P<pid>[^/]+)/datastreams/(?P<dsid>[^/]+)$"),
     "add_datastream"),
    ("PUT", re.compile(
        r"^/manage/(?P<pid>[^/]+)/datastreams/(?P<dsid>[^/]+)$"),
     "modify_datastream"),
    ("POST", re.compile(
        r"^/manage/(?P<pid>[^/]+)/disseminators/(?P<dissid>[^/]+)$"),
     "add_disseminator"),
    ("PUT", re.compile(
        r"^/manage/(?P<pid>[^/]+)/disseminators/(?P<dissid>[^/]+)$"),
     "modify_disseminator"),
    ("DELETE", re.compile(r"^/manage/(?P<pid>[^/]+)$"), "purge"),
    ("GET", re.compile(r"^/manage/(?P<pid>[^/]+)/export$"), "export"),
    ("GET", re.compile(r"^/manage/(?P<pid>[^/]+)/audit$"), "audit"),
]


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: "RepositoryServer"

    def log_message(self, format, *args):
        log.debug("%s - %s", self.address_string(), format % args)

    def do_GET(self):
        self._route("GET")

    def do_POST(self):
        self._route("POST")

    def do_PUT(self):
        self._route("PUT")

    def do_DELETE(self):
        self._route("DELETE")

    # -- dispatch ---------------------------------------------------------

    def _route(self, verb: str):
        parts = urlsplit(self.path)
        self.params = dict(parse_qsl(parts.query, keep_blank_values=True))
        try:
            for route_verb, pattern, name in _ROUTES:
                match = pattern.match(parts.path)
                if match:
                    if route_verb != verb:
                        continue
                    if parts.path.startswith("/manage"):
                        self._authorize()
                    getattr(self, "handle_" + name)(**match.groupdict())
                    return
            raise _ApiError("NOT_FOUND", f"no route for {parts.path}")
        except RepositoryError as exc:
            self._send_error(exc)
        except BrokenPipeError:
            pass
        except Exception:
            log.exception("unhandled error serving %s", self.path)
            self._send_error(_ApiError("INTERNAL", "internal error"))

    def _authorize(self):
        token = self.server.config.management_token
        if token is None:
            raise _ApiError("UNAUTHORIZED", "management API is disabled")
        supplied = self.headers.get("Authorization", "")
        if supplied != f"Bearer {token}":
            raise _ApiError("UNAUTHORIZED", "missing or bad management token")

    # -- request helpers ---------------------------------------------------

    def _pid(self, text: str) -> Pid:
        try:
            return Pid.parse(text)
        except ValueError:
            raise _ApiError("BAD_REQUEST", f"bad PID {text!r}")

    def _as_of(self):
        value = self.params.get("asOfDate")
        if value is None:
            return None
        try:
            return model.parse_timestamp(value)
        except ValueError:
            raise _ApiError("BAD_TIMESTAMP",
                            f"asOfDate must be YYYY-MM-DDThh:mm:ss, "
                            f"got {value!r}")

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _principal(self) -> str:
        return (self.headers.get("X-Principal")
                or self.params.get("principal") or "api-client")

    def _justification(self) -> str:
        return self.params.get("justification", "")

    # -- response helpers --------------------------------------------------

    def _send_json(self, status: int, payload: dict):
        body = json.dumps(payload, indent=2).encode("utf-8") + b"\n"
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_bytes(self, status: int, mime: str, body: bytes):
        self.send_response(status)
        self.send_header("Content-Type", mime)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_stream(self, mime: str, chunks, extra_headers=()):
        """Chunked transfer; the body is never buffered whole."""
        self.send_response(200)
        self.send_header("Content-Type", mime)
        self.send_header("Transfer-Encoding", "chunked")
        for name, value in extra_headers:
            self.send_header(name, value)
        self.end_headers()
        for chunk in chunks:
            if chunk:
                self.wfile.write(b"%x\r\n%s\r\n" % (len(chunk), chunk))
        self.wfile.write(b"0\r\n\r\n")

    def _send_error(self, exc: RepositoryError):
        code = exc.code
        status = STATUS_BY_CODE.get(code, 500)
        payload = {"error": code, "message": str(exc)}
        violations = getattr(exc, "violations", None)
        if violations:
            payload["violations"] = [
                {"code": getattr(v, "code", getattr(v, "rule", "")),
                 "locator": getattr(v, "locator", getattr(v, "subject", "")),
                 "message": v.message}
                for v in violations
            ]
        dependents = getattr(exc, "dependents", None)
        if dependents:
            payload["dependents"] = dependents
        try:
            self._send_json(status, payload)
        except BrokenPipeError:
            pass

    # -- access routes -------------------------------------------------------

    def handle_wsdl(self):
        self._send_bytes(200, "text/xml",
                         self.server.service_description())

    def handle_bdefs(self, pid):
        as_of = self._as_of()
        bdefs = self.server.access.get_behavior_def_types(self._pid(pid),
                                                          as_of)
        self._send_json(200, {
            "pid": pid,
            "asOfDate": model.format_timestamp(as_of) if as_of else None,
            "behaviorDefs": [b.render() for b in bdefs],
        })

    def handle_methods(self, pid, bdef):
        as_of = self._as_of()
        profile = self.server.access.get_methods(self._pid(pid),
                                                 self._pid(bdef), as_of)
        self._send_json(200, {
            "pid": pid,
            "behaviorDef": profile.bdef_pid.render(),
            "asOfDate": model.format_timestamp(as_of) if as_of else None,
            "methods": [
                {
                    "name": m.name,
                    "parameters": [
                        {"name": p.name, "required": p.required,
                         "default": p.default}
                        for p in m.user_params
                    ],
                }
                for m in profile.methods
            ],
        })

    def handle_dissem(self, pid, bdef, method):
        as_of = self._as_of()
        user_args = {k: v for k, v in self.params.items()
                     if k not in ("asOfDate",)}
        dissemination = self.server.access.get_dissemination(
            self._pid(pid), self._pid(bdef), method, user_args, as_of)
        headers = []
        if dissemination.mime_warning:
            headers.append(("X-Mime-Warning", dissemination.mime_warning))
        self._send_stream(dissemination.mime_type, dissemination.body,
                          headers)

    def handle_datastream(self, pid, dsid):
        mime, chunks = self.server.access.get_datastream_direct(
            self._pid(pid), dsid, self._as_of())
        self._send_stream(mime, chunks)

    # -- management routes ----------------------------------------------------

    def handle_ingest(self):
        pid = self.server.management.ingest(
            self._body(), self._principal(), self._justification())
        self._send_json(201, {"pid": pid.render()})

    def _control(self) -> ControlGroup:
        value = self.params.get("control", "INTERNAL")
        try:
            return ControlGroup(value)
        except ValueError:
            raise _ApiError("BAD_REQUEST",
                            f"control must be INTERNAL or EXTERNAL_REF, "
                            f"got {value!r}")

    def _content_argument(self, control: ControlGroup):
        if control is ControlGroup.EXTERNAL_REF:
            location = self.params.get("location")
            if location is None:
                raise _ApiError("BAD_REQUEST",
                                "external datastreams need ?location=")
            return location
        return self._body()

    def handle_add_datastream(self, pid, dsid):
        control = self._control()
        mime = (self.headers.get("Content-Type")
                or "application/octet-stream").split(";")[0].strip()
        version_id = self.server.management.add_datastream(
            self._pid(pid), dsid, self.params.get("mimeType", mime), control,
            self._content_argument(control), self._principal(),
            self._justification())
        self._send_json(201, {"versionId": version_id})

    def handle_modify_datastream(self, pid, dsid):
        mime = self.headers.get("Content-Type")
        if mime:
            mime = mime.split(";")[0].strip()
        mime = self.params.get("mimeType", mime)
        if "control" in self.params:
            control = self._control()
            content = self._content_argument(control)
        else:
            control, content = None, None
        version_id = self.server.management.modify_datastream(
            self._pid(pid), dsid, mime, control, content, self._principal(),
            self._justification())
        self._send_json(200, {"versionId": version_id})

    def _disseminator_payload(self):
        try:
            payload = json.loads(self._body().decode("utf-8"))
            bdef = Pid.parse(payload["bdef"])
            bmech = Pid.parse(payload["bmech"])
            binding_map = dict(payload.get("bindingMap", {}))
        except (ValueError, KeyError, AttributeError, TypeError) as exc:
            raise _ApiError(
                "BAD_REQUEST",
                f'body must be JSON {{"bdef", "bmech", "bindingMap"}}: {exc}')
        return bdef, bmech, binding_map

    def handle_add_disseminator(self, pid, dissid):
        bdef, bmech, binding_map = self._disseminator_payload()
        version_id = self.server.management.add_disseminator(
            self._pid(pid), dissid, bdef, bmech, binding_map,
            self._principal(), self._justification())
        self._send_json(201, {"versionId": version_id})

    def handle_modify_disseminator(self, pid, dissid):
        bdef, bmech, binding_map = self._disseminator_payload()
        version_id = self.server.management.modify_disseminator(
            self._pid(pid), dissid, bdef, bmech, binding_map,
            self._principal(), self._justification())
        self._send_json(200, {"versionId": version_id})

    def handle_purge(self, pid):
        self.server.management.purge_object(
            self._pid(pid), self._principal(), self._justification())
        self._send_json(200, {"purged": pid})

    def handle_export(self, pid):
        data = self.server.management.export(self._pid(pid))
        self._send_bytes(200, "text/xml", data)

    def handle_audit(self, pid):
        obj = self.server.repo.get_object(self._pid(pid))
        self._send_json(200, {
            "pid": pid,
            "auditTrail": [
                {
                    "id": rec.id,
                    "action": rec.action.value,
                    "componentId": rec.component_id,
                    "responsible": rec.responsible,
                    "date": model.format_timestamp(rec.date),
                    "justification": rec.justification,
                }
                for rec in obj.audit_trail
            ],
        })


#: (name, api, verb, location template) for the self-description document.
_OPERATIONS = [
    ("GetBehaviorDefTypes", "access", "GET", "/access/(PID)/bdefs"),
    ("GetMethods", "access", "GET", "/access/(PID)/methods/(BDEF)"),
    ("GetDissemination", "access", "GET",
     "/access/(PID)/dissem/(BDEF)/(METHOD)"),
    ("GetDatastreamDissemination", "access", "GET", "/get/(PID)/(DSID)"),
    ("Ingest", "management", "POST", "/manage/ingest"),
    ("AddDatastream", "management", "POST",
     "/manage/(PID)/datastreams/(DSID)"),
    ("ModifyDatastream", "management", "PUT",
     "/manage/(PID)/datastreams/(DSID)"),
    ("AddDisseminator", "management", "POST",
     "/manage/(PID)/disseminators/(DISSID)"),
    ("ModifyDisseminator", "management", "PUT",
     "/manage/(PID)/disseminators/(DISSID)"),
    ("PurgeObject", "management", "DELETE", "/manage/(PID)"),
    ("Export", "management", "GET", "/manage/(PID)/export"),
    ("GetAuditTrail", "management", "GET", "/manage/(PID)/audit"),
]


class RepositoryServer:
    """Wires the library services behind a threading HTTP server."""

    def __init__(self, config: ServerConfig):
        self.config = config
        fetcher = HttpFetcher(timeout=config.fetch_timeout,
                              size_cap=config.size_cap)
        self.repo = Repository(config.data_root, fetcher=fetcher,
                               fsync=config.fsync)
        self._http = ThreadingHTTPServer((config.host, config.port), _Handler)
        self._http.daemon_threads = True
        port = self._http.server_address[1]
        self.base_url = (config.public_base_url
                         or f"http://{config.host}:{port}").rstrip("/")
        self.access = AccessService(self.repo, self.base_url)
        self.management = ManagementService(
            self.repo, default_namespace=config.default_namespace)
        self._http.config = config
        self._http.repo = self.repo
        self._http.access = self.access
        self._http.management = self.management
        self._http.service_description = self.service_description
        self._thread = threading.Thread(
            target=lambda: self._http.serve_forever(poll_interval=0.05),
            daemon=True)

    @property
    def port(self) -> int:
        return self._http.server_address[1]

    def start(self):
        self._thread.start()
        log.info("repository listening on %s", self.base_url)
        return self

    def stop(self):
        self._http.shutdown()
        self._http.server_close()

    def serve_forever(self):
        try:
            self._http.serve_forever()
        finally:
            self._http.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def service_description(self) -> bytes:
        """Both APIs and their HTTP binding, in the descriptor dialect."""
        out = Emitter()
        out.open(0, "definitions",
                 {"name": "repository", "xmlns": DESCRIPTOR_NS})
        out.open(1, "portType", {"name": "Repository"})
        for name, api, _verb, _location in _OPERATIONS:
            out.element(2, "operation", {"api": api, "name": name})
        out.close(1, "portType")
        out.open(1, "binding", {"name": "http", "type": "urn:this-repository"})
        for name, api, verb, location in _OPERATIONS:
            out.element(2, "operation", {
                "api": api, "location": location, "name": name, "verb": verb})
        out.close(1, "binding")
        out.open(1, "service", {"name": "repository"})
        out.element(2, "port", {"address": self.base_url, "binding": "http"})
        out.close(1, "service")
        out.close(0, "definitions")
        return out.tobytes()
