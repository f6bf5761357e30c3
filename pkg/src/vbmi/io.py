"""Flat binary matrix files for offline inspection.

Layout: ``b"VBMX"``, then little-endian float64 values ``ndim, dim_0 .. dim_{n-1}, fs``,
then the array itself as row-major little-endian float64.
"""

from pathlib import Path

import numpy as np

from .exceptions import FormatError

MAGIC = b"VBMX"


def write_matrix(path, array, fs_hz):
    array = np.ascontiguousarray(array, dtype="<f8")
    header = np.array([array.ndim, *array.shape, fs_hz], dtype="<f8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(header.tobytes())
        f.write(array.tobytes())


def read_matrix(path):
    """Return ``(array, fs_hz)``."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise FormatError(f"{path}: not a matrix file")
    ndim = int(np.frombuffer(data, "<f8", 1, 4)[0])
    if not 0 < ndim <= 8:
        raise FormatError(f"{path}: bad ndim {ndim}")
    header = np.frombuffer(data, "<f8", ndim + 2, 4)
    shape = tuple(int(d) for d in header[1:ndim + 1])
    offset = 4 + 8 * (ndim + 2)
    count = int(np.prod(shape))
    if len(data) != offset + 8 * count:
        raise FormatError(f"{path}: expected {count} values, file size disagrees")
    return np.frombuffer(data, "<f8", count, offset).reshape(shape).copy(), float(header[-1])
