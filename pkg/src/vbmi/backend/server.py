"""HTTP/1.1 template service.

Routes::

    PUT /v1/users/{id}/templates            body = serialized model
    GET /v1/users/{id}/templates/latest
    GET /v1/users/{id}/templates/{version}

Requests carry ``Authorization: Bearer <token>``. A PUT declares the model
family in ``X-Algo`` and the payload CRC-32 (8 hex digits) in
``X-Content-CRC32``.
"""

import json
import logging
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..exceptions import CorruptRecordError
from .store import ApiError, BadRequest, NotFound

logger = logging.getLogger(__name__)

_ROUTE = re.compile(r"^/v1/users/([^/]+)/templates(?:/([^/]+))?/?$")
MAX_BODY = 64 << 20


class TemplateService:
    """Authentication in front of a :class:`TemplateStore`."""

    def __init__(self, store, tokens):
        self.store = store
        self.tokens = tokens

    def put_template(self, auth_header, user_id, algo, payload, content_hash):
        self.tokens.authorize(auth_header, user_id)
        return self.store.put(user_id, algo, payload, content_hash)

    def get_template(self, auth_header, user_id, version="latest"):
        self.tokens.authorize(auth_header, user_id)
        return self.store.get(user_id, version)


def _make_handler(service):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"
        server_version = "vbmi-templates/1"

        def log_message(self, fmt, *args):
            logger.debug("%s - " + fmt, self.address_string(), *args)

        def _reply(self, status, body=b"", headers=None, content_type="application/json"):
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            for k, v in (headers or {}).items():
                self.send_header(k, v)
            self.end_headers()
            self.wfile.write(body)

        def _error(self, status, message):
            self._reply(status, json.dumps({"error": message}).encode("utf-8"))

        def _route(self):
            m = _ROUTE.match(self.path.split("?", 1)[0])
            if not m:
                raise NotFound(f"no route for {self.path}")
            return m.group(1), m.group(2)

        def _dispatch(self, fn):
            try:
                fn()
            except ApiError as exc:
                self._error(exc.status, exc.message)
            except CorruptRecordError as exc:
                self._error(500, str(exc))

        def do_PUT(self):
            def run():
                user_id, rest = self._route()
                if rest is not None:
                    raise NotFound("PUT goes to /v1/users/{id}/templates")
                length = int(self.headers.get("Content-Length", 0))
                if length > MAX_BODY:
                    raise BadRequest("payload too large")
                payload = self.rfile.read(length)
                auth = self.headers.get("Authorization")
                try:
                    crc = int(self.headers.get("X-Content-CRC32", ""), 16)
                except ValueError:
                    service.tokens.authorize(auth, user_id)
                    raise BadRequest("missing or malformed X-Content-CRC32") from None
                algo = (self.headers.get("X-Algo") or "").upper()
                version = service.put_template(auth, user_id, algo, payload, crc)
                body = json.dumps({"user_id": user_id, "version": version, "content_hash": f"{crc:08x}"})
                self._reply(201, body.encode("utf-8"))

            self._dispatch(run)

        def do_GET(self):
            def run():
                user_id, version = self._route()
                if version is None:
                    raise NotFound("GET needs /latest or a version id")
                rec = service.get_template(self.headers.get("Authorization"), user_id, version)
                headers = {"X-Version": str(rec.version), "X-Algo": rec.algo,
                           "X-Content-CRC32": f"{rec.content_hash:08x}", "X-Created-At": repr(rec.created_at),
                           "X-Template-Meta": json.dumps(rec.meta, sort_keys=True)}
                self._reply(200, rec.payload, headers, "application/octet-stream")

            self._dispatch(run)

    return Handler


class TemplateServer:
    def __init__(self, service, address=("127.0.0.1", 0)):
        self.httpd = ThreadingHTTPServer(address, _make_handler(service))
        self.httpd.daemon_threads = True
        self._thread = None

    @property
    def address(self):
        return self.httpd.server_address[:2]

    @property
    def url(self):
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self):
        self._thread = threading.Thread(target=self.httpd.serve_forever, name="vbmi-templates", daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self.httpd.shutdown()
        self.httpd.server_close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()


def serve_templates(store, tokens, address=("127.0.0.1", 0)):
    return TemplateServer(TemplateService(store, tokens), address).start()
