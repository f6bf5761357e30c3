"""Minimal HTTP client for the template service."""

import http.client
import json
import zlib
from urllib.parse import urlsplit

from .serialization import deserialize_model, serialize_model
from .store import TemplateRecord


class TemplateApiError(Exception):
    def __init__(self, status, message):
        super().__init__(f"{status}: {message}")
        self.status = status


class TemplateClient:
    def __init__(self, base_url, token, timeout=10.0):
        parts = urlsplit(base_url)
        self.host = parts.hostname
        self.port = parts.port
        self.token = token
        self.timeout = timeout

    def _request(self, method, path, body=None, headers=None):
        conn = http.client.HTTPConnection(self.host, self.port, timeout=self.timeout)
        try:
            hdrs = {"Authorization": f"Bearer {self.token}"}
            hdrs.update(headers or {})
            conn.request(method, path, body=body, headers=hdrs)
            resp = conn.getresponse()
            data = resp.read()
            if resp.status >= 400:
                try:
                    msg = json.loads(data)["error"]
                except (ValueError, KeyError):
                    msg = data.decode("utf-8", "replace")
                raise TemplateApiError(resp.status, msg)
            return resp, data
        finally:
            conn.close()

    def put_payload(self, user_id, algo, payload, content_hash=None):
        crc = zlib.crc32(payload) if content_hash is None else content_hash
        _, data = self._request("PUT", f"/v1/users/{user_id}/templates", payload,
                                {"X-Algo": algo, "X-Content-CRC32": f"{crc:08x}",
                                 "Content-Type": "application/octet-stream"})
        return json.loads(data)["version"]

    def put_model(self, user_id, model):
        return self.put_payload(user_id, model.algo, serialize_model(model))

    def get(self, user_id, version="latest"):
        resp, data = self._request("GET", f"/v1/users/{user_id}/templates/{version}")
        return TemplateRecord(user_id, resp.getheader("X-Algo"), int(resp.getheader("X-Version")),
                              float(resp.getheader("X-Created-At")), json.loads(resp.getheader("X-Template-Meta")),
                              data, int(resp.getheader("X-Content-CRC32"), 16))

    def get_model(self, user_id, version="latest"):
        return deserialize_model(self.get(user_id, version).payload)
