"""Append-only on-disk template store with an in-process read cache."""

import json
import os
import re
import threading
import time
import zlib
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

from ..exceptions import CorruptRecordError, FormatError
from .serialization import deserialize_model, read_header

USER_ID = re.compile(r"^[A-Za-z0-9_.-]{1,64}$")


class ApiError(Exception):
    status = 500

    def __init__(self, message):
        super().__init__(message)
        self.message = message


class BadRequest(ApiError):
    status = 400


class Unauthorized(ApiError):
    status = 401


class Forbidden(ApiError):
    status = 403


class NotFound(ApiError):
    status = 404


class Conflict(ApiError):
    status = 409


@dataclass
class TemplateRecord:
    user_id: str
    algo: str
    version: int
    created_at: float
    meta: dict
    payload: bytes = field(repr=False)
    content_hash: int = 0

    def verify(self):
        return zlib.crc32(self.payload) == self.content_hash


def _atomic_write(path, data):
    tmp = path.with_name(f".{path.name}.{os.getpid()}.{threading.get_ident()}.tmp")
    with open(tmp, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


class TemplateStore:
    """One directory per user holding immutable payload blobs plus ``index.json``.

    A put writes the blob, then atomically replaces the index; a crash
    between the two leaves an orphan blob but never a dangling latest pointer.
    """

    def __init__(self, root, cache_size=64):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks = {}
        self._locks_guard = threading.Lock()
        self._cache = OrderedDict()
        self._cache_lock = threading.Lock()
        self.cache_size = cache_size
        self.cache_hits = 0
        self.cache_misses = 0

    def _user_dir(self, user_id):
        if not USER_ID.match(user_id or ""):
            raise BadRequest(f"invalid user id {user_id!r}")
        return self.root / user_id

    def _lock(self, user_id):
        with self._locks_guard:
            return self._locks.setdefault(user_id, threading.Lock())

    def _read_index(self, user_dir):
        path = user_dir / "index.json"
        if not path.exists():
            return {"latest": 0, "versions": {}}
        return json.loads(path.read_text(encoding="utf-8"))

    def put(self, user_id, algo, payload, content_hash):
        """Persist a template and return its new version id."""
        if zlib.crc32(payload) != content_hash:
            raise BadRequest("payload checksum does not match declared content hash")
        try:
            meta = read_header(payload)
            deserialize_model(payload)
        except FormatError as exc:
            raise BadRequest(f"payload is not a template: {exc}") from exc
        if meta["algo"] != algo:
            raise Conflict(f"declared algo {algo} but payload holds a {meta['algo']} model")
        user_dir = self._user_dir(user_id)
        with self._lock(user_id):
            user_dir.mkdir(exist_ok=True)
            index = self._read_index(user_dir)
            version = index["latest"] + 1
            name = f"v{version:06d}-{content_hash:08x}.vbmi"
            _atomic_write(user_dir / name, payload)
            created = time.time()
            index["versions"][str(version)] = {"file": name, "algo": algo, "created_at": created,
                                               "meta": meta, "content_hash": content_hash}
            index["latest"] = version
            _atomic_write(user_dir / "index.json", json.dumps(index, sort_keys=True).encode("utf-8"))
        record = TemplateRecord(user_id, algo, version, created, meta, bytes(payload), content_hash)
        self._cache_put(record)
        with self._cache_lock:
            self._cache[(user_id, "latest")] = version
        return version

    def _cache_put(self, record):
        with self._cache_lock:
            self._cache[(record.user_id, record.version)] = record
            self._cache.move_to_end((record.user_id, record.version))
            while sum(isinstance(k[1], int) for k in self._cache) > self.cache_size:
                oldest = next(k for k in self._cache if isinstance(k[1], int))
                del self._cache[oldest]

    def latest_version(self, user_id):
        user_dir = self._user_dir(user_id)
        index = self._read_index(user_dir)
        if not index["latest"]:
            raise NotFound(f"no templates for user {user_id!r}")
        return index["latest"]

    def get(self, user_id, version="latest"):
        """Return a :class:`TemplateRecord`; served from cache when warm."""
        user_dir = self._user_dir(user_id)
        if version == "latest":
            version = self.latest_version(user_id)
        try:
            version = int(version)
        except (TypeError, ValueError):
            raise BadRequest(f"bad version {version!r}") from None
        with self._cache_lock:
            record = self._cache.get((user_id, version))
            if record is not None:
                self._cache.move_to_end((user_id, version))
                self.cache_hits += 1
                return record
        self.cache_misses += 1
        entry = self._read_index(user_dir)["versions"].get(str(version))
        if entry is None:
            raise NotFound(f"user {user_id!r} has no template version {version}")
        payload = (user_dir / entry["file"]).read_bytes()
        record = TemplateRecord(user_id, entry["algo"], version, entry["created_at"], entry["meta"],
                                payload, entry["content_hash"])
        if not record.verify():
            raise CorruptRecordError(f"stored template {user_id}/v{version} fails its checksum")
        self._cache_put(record)
        return record

    def clear_cache(self):
        with self._cache_lock:
            self._cache.clear()


class TokenTable:
    """Static bearer tokens mapped to the user ids they may access (``*`` for all)."""

    def __init__(self, tokens):
        self.tokens = {tok: set(users) for tok, users in tokens.items()}

    @classmethod
    def from_file(cls, path):
        from .._config import load_config

        cfg = load_config(Path(path))
        return cls(cfg.get("tokens", {}))

    def authorize(self, header, user_id):
        if not header or not header.startswith("Bearer "):
            raise Unauthorized("missing bearer token")
        users = self.tokens.get(header[len("Bearer "):].strip())
        if users is None:
            raise Unauthorized("unknown token")
        if "*" not in users and user_id not in users:
            raise Forbidden(f"token not permitted for user {user_id!r}")
