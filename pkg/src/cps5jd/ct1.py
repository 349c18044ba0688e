"""Reader/writer for the CT1 binary complex tensor format.

Layout (little endian)::

    b"CT1\\0"            magic, 4 bytes
    u32                  order N
    u64 * N              dims
    f64 * 2*prod(dims)   interleaved (re, im), row-major
"""
from __future__ import annotations

import os
import struct

import numpy as np

MAGIC = b"CT1\x00"

__all__ = ["CT1FormatError", "write_ct1", "read_ct1", "dumps_ct1", "loads_ct1"]


class CT1FormatError(ValueError):
    """Malformed CT1 payload; ``offset`` is the byte position of the fault."""

    def __init__(self, message, offset):
        super().__init__("%s (at byte offset %d)" % (message, offset))
        self.offset = offset


def dumps_ct1(array):
    arr = np.array(array, dtype=np.complex128, order="C")
    header = MAGIC + struct.pack("<I", arr.ndim)
    header += struct.pack("<%dQ" % arr.ndim, *arr.shape)
    body = arr.astype("<c16", copy=False).tobytes(order="C")
    return header + body


def loads_ct1(buf):
    buf = bytes(buf)
    if len(buf) < 4:
        raise CT1FormatError("truncated magic", len(buf))
    if buf[:4] != MAGIC:
        raise CT1FormatError("bad magic %r" % buf[:4], 0)
    if len(buf) < 8:
        raise CT1FormatError("truncated order field", len(buf))
    (order,) = struct.unpack_from("<I", buf, 4)
    dims_end = 8 + 8 * order
    if len(buf) < dims_end:
        raise CT1FormatError("truncated dims (order %d)" % order, len(buf))
    dims = struct.unpack_from("<%dQ" % order, buf, 8)
    n_values = int(np.prod(dims, dtype=np.int64)) if order else 1
    expected = dims_end + 16 * n_values
    if len(buf) < expected:
        raise CT1FormatError(
            "truncated data: expected %d bytes, file has %d" % (expected, len(buf)),
            len(buf),
        )
    if len(buf) > expected:
        raise CT1FormatError("%d trailing bytes" % (len(buf) - expected), expected)
    data = np.frombuffer(buf, dtype="<c16", count=n_values, offset=dims_end)
    return data.astype(np.complex128).reshape(dims)


def write_ct1(path, array):
    with open(os.fspath(path), "wb") as fh:
        fh.write(dumps_ct1(array))


def read_ct1(path):
    with open(os.fspath(path), "rb") as fh:
        return loads_ct1(fh.read())
