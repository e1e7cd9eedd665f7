"""Standalone implementation of the OSRD wire protocol.

This module is deliberately self-contained: the bridge is a separate
process that may be deployed without the client library, so the byte
layout is re-implemented here from the protocol definition rather than
imported. Frame layout (all integers little-endian):

    magic   4 bytes  "OSRD"
    version u16
    opcode  u16      0=hello 1=init 2=predict 3=advance 4=finalize
                     5=shutdown 255=error
    length  u64      payload byte count
    payload

Non-error payloads carry one tensor block followed by a metadata block:

    rank    u8
    dims    rank * u32
    dtype   u8       0=f32 1=f64
    data    raw little-endian samples
    meta    t u32, total_steps u32, planes u32

A rank-0 tensor (no dims, no data) carries metadata only. Error payloads
are a UTF-8 message.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"OSRD"
VERSION = 1

OP_HELLO = 0
OP_INIT = 1
OP_PREDICT = 2
OP_ADVANCE = 3
OP_FINALIZE = 4
OP_SHUTDOWN = 5
OP_ERROR = 255

HEADER = struct.Struct("<4sHHQ")

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}


class ProtocolViolation(Exception):
    """Malformed frame or payload from the peer."""


def encode_frame(opcode: int, payload: bytes, version: int = VERSION) -> bytes:
    return HEADER.pack(MAGIC, version, opcode, len(payload)) + payload


def error_frame(message: str) -> bytes:
    return encode_frame(OP_ERROR, message.encode("utf-8"))


def recv_exact(sock, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining > 0:
        chunk = sock.recv(remaining)
        if not chunk:
            raise ConnectionError("peer closed the stream mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(sock):
    """Read one frame; returns (version, opcode, payload).

    The version is returned rather than checked so the server can answer a
    mismatch with an error frame instead of dropping the connection.
    """
    magic, version, opcode, length = HEADER.unpack(recv_exact(sock, HEADER.size))
    if magic != MAGIC:
        raise ProtocolViolation(f"bad frame magic {magic!r}")
    payload = recv_exact(sock, length) if length else b""
    return version, opcode, payload


def pack_payload(arr, t: int, total_steps: int, planes: int) -> bytes:
    """Serialize a tensor (or None for metadata-only) plus metadata."""
    if arr is None:
        body = bytes([0, 0])
    else:
        arr = np.asarray(arr)
        if arr.dtype not in _DTYPE_CODES:
            arr = arr.astype(np.float64)
        code = _DTYPE_CODES[arr.dtype]
        body = bytes([arr.ndim])
        body += struct.pack(f"<{arr.ndim}I", *arr.shape)
        body += bytes([code])
        body += np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()
    body += struct.pack("<III", t, total_steps, planes)
    return body


def unpack_payload(payload: bytes):
    """Inverse of :func:`pack_payload`; returns (array_or_None, t, T, m)."""
    try:
        rank = payload[0]
        offset = 1
        dims = struct.unpack_from(f"<{rank}I", payload, offset)
        offset += 4 * rank
        code = payload[offset]
        offset += 1
        if code not in _DTYPES:
            raise ProtocolViolation(f"unknown dtype code {code}")
        dtype = _DTYPES[code]
        count = int(np.prod(dims)) if rank else 0
        nbytes = count * dtype.itemsize
        if rank:
            arr = np.frombuffer(payload, dtype=dtype, count=count, offset=offset)
            arr = arr.reshape(dims).astype(dtype.newbyteorder("="), copy=True)
        else:
            arr = None
        offset += nbytes
        t, total_steps, planes = struct.unpack_from("<III", payload, offset)
        if offset + 12 != len(payload):
            raise ProtocolViolation("payload size does not match declared tensor")
        return arr, t, total_steps, planes
    except (IndexError, struct.error) as exc:
        raise ProtocolViolation(f"truncated payload: {exc}") from exc
