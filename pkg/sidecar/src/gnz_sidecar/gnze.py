"""Standalone GNZE codec.

The embedding file format is the sidecar's external interface to the core:
magic "GNZE" | u32 version=1 | u64 n | u64 P | n*P f32 row-major, all
little-endian. Implemented locally so the sidecar has no dependency on the
core package.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

_MAGIC = b"GNZE"
_HEADER = struct.Struct("<4sIQQ")
VERSION = 1


class GnzeError(ValueError):
    pass


def write_embeddings(m: np.ndarray, path) -> None:
    arr = np.ascontiguousarray(m, dtype=np.float32)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise GnzeError(f"embeddings must be a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise GnzeError("embeddings contain non-finite values")
    payload = _HEADER.pack(_MAGIC, VERSION, arr.shape[0], arr.shape[1]) + arr.tobytes(order="C")
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".gnze-", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def read_embeddings(path) -> np.ndarray:
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < _HEADER.size:
        raise GnzeError("file shorter than header")
    magic, version, n, p = _HEADER.unpack_from(buf)
    if magic != _MAGIC:
        raise GnzeError(f"bad magic {magic!r}")
    if version != VERSION:
        raise GnzeError(f"unsupported version {version}")
    payload = buf[_HEADER.size:]
    if len(payload) != n * p * 4:
        raise GnzeError(f"payload size {len(payload)} does not match declared {n}x{p}")
    data = np.frombuffer(payload, dtype="<f4").reshape(n, p).copy()
    if not np.isfinite(data).all():
        raise GnzeError("payload contains non-finite values")
    return data
