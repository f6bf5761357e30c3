"""Versioned binary template format for trained decoders.

Layout (little-endian)::

    b"VBMI" | format version u16 | algo id u8
    | fs f64 | T u32 | K u32 | n_delays u32 | n_components u32 | montage hash u32 | code hash u32
    | matrices, each: rows u32 | cols u32 | rows*cols f64 (row-major)
    | crc32 u32 over everything before it

Matrix order: classes, lags, params ([gamma]), eigenvalues, filters, then K
templates; TDCA appends its K references.
"""

import struct
import zlib

import numpy as np

from ..decoder import TDCA, TRCA
from ..exceptions import FormatError, UnsupportedVersionError

MAGIC = b"VBMI"
FORMAT_VERSION = 1
ALGO_IDS = {"TRCA": 1, "TDCA": 2}
ALGO_NAMES = {v: k for k, v in ALGO_IDS.items()}
_PREFIX = struct.Struct("<4sHB")
_META = struct.Struct("<dIIIIII")
_DIMS = struct.Struct("<II")
_CRC = struct.Struct("<I")
HEADER_SIZE = _PREFIX.size + _META.size


def _matrix(m):
    m = np.atleast_2d(np.asarray(m, dtype="<f8"))
    return _DIMS.pack(*m.shape) + np.ascontiguousarray(m).tobytes()


def serialize_model(model):
    meta = model.meta
    algo = meta["algo"]
    out = [_PREFIX.pack(MAGIC, FORMAT_VERSION, ALGO_IDS[algo]),
           _META.pack(meta["fs_hz"], meta["n_samples"], meta["n_classes"], meta["n_delays"],
                      meta["n_components"], meta["montage_hash"], meta["code_hash"])]
    mats = [model.classes_.astype(float), model.lags_.astype(float), [model.gamma],
            model.eigenvalues_, model.filters_, *model.templates_]
    if algo == "TDCA":
        mats.extend(model.references_)
    out.extend(_matrix(m) for m in mats)
    body = b"".join(out)
    return body + _CRC.pack(zlib.crc32(body))


def read_header(data):
    """Parse and validate the fixed header; returns a meta dict (no checksum check)."""
    if len(data) < HEADER_SIZE:
        raise FormatError("truncated template header")
    magic, version, algo_id = _PREFIX.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError("bad magic; not a template file")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"template format version {version} is not supported "
                                      f"(expected {FORMAT_VERSION})")
    if algo_id not in ALGO_NAMES:
        raise FormatError(f"unknown algorithm id {algo_id}")
    fs, n_t, k, n_delays, n_comp, mhash, chash = _META.unpack_from(data, _PREFIX.size)
    return {"algo": ALGO_NAMES[algo_id], "fs_hz": fs, "n_samples": n_t, "n_classes": k,
            "n_delays": n_delays, "n_components": n_comp, "montage_hash": mhash, "code_hash": chash}


def deserialize_model(data):
    data = bytes(data)
    meta = read_header(data)
    if len(data) < HEADER_SIZE + _CRC.size:
        raise FormatError("truncated template")
    (crc,) = _CRC.unpack_from(data, len(data) - _CRC.size)
    if zlib.crc32(data[:-_CRC.size]) != crc:
        raise FormatError("template checksum mismatch (corrupt or truncated)")
    pos = HEADER_SIZE
    end = len(data) - _CRC.size

    def take():
        nonlocal pos
        if pos + _DIMS.size > end:
            raise FormatError("truncated matrix header")
        rows, cols = _DIMS.unpack_from(data, pos)
        pos += _DIMS.size
        n = rows * cols * 8
        if pos + n > end:
            raise FormatError("truncated matrix data")
        m = np.frombuffer(data, "<f8", rows * cols, pos).reshape(rows, cols).astype(np.float64)
        pos += n
        return m

    k = meta["n_classes"]
    classes = take()[0]
    lags = take()[0]
    gamma = float(take()[0, 0])
    evals = take()[0]
    filters = take()
    templates = np.stack([take() for _ in range(k)])
    if meta["algo"] == "TRCA":
        model = TRCA(gamma=gamma, fs_hz=meta["fs_hz"])
        model.n_channels_, model.n_samples_ = templates.shape[1:]
    else:
        model = TDCA(n_delays=meta["n_delays"], n_components=meta["n_components"], gamma=gamma,
                     fs_hz=meta["fs_hz"])
        model.references_ = [take() for _ in range(k)]
        model.n_channels_ = filters.shape[0] // (meta["n_delays"] + 1)
        model.n_samples_ = meta["n_samples"]
    if pos != end:
        raise FormatError(f"{end - pos} trailing bytes after matrices")
    model.classes_ = classes.astype(np.int64) if np.all(classes == np.round(classes)) else classes
    model.lags_ = lags.astype(np.int64)
    model.eigenvalues_ = evals
    model.filters_ = filters
    model.templates_ = templates
    model.code_hash_ = meta["code_hash"]
    model.montage_hash_ = meta["montage_hash"]
    model._prepare()
    return model
