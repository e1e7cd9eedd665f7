"""Binary wire protocol for external denoiser backends.

Frame layout (all integers little-endian):

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

A rank-0 tensor (no dims, no data) is the carrier for requests that need
only metadata. Error payloads are a UTF-8 message. The byte layout is
normative: conforming peers in any language must produce identical bytes.
"""

from __future__ import annotations

import socket
import struct

import numpy as np

from .errors import ConnectionFailure, ProtocolError, ShapeMismatch, VersionMismatch

MAGIC = b"OSRD"
VERSION = 1

OP_HELLO = 0
OP_INIT = 1
OP_PREDICT = 2
OP_ADVANCE = 3
OP_FINALIZE = 4
OP_SHUTDOWN = 5
OP_ERROR = 255

_OPCODES = {OP_HELLO, OP_INIT, OP_PREDICT, OP_ADVANCE, OP_FINALIZE, OP_SHUTDOWN, OP_ERROR}

_HEADER = struct.Struct("<4sHHQ")
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}


def encode_frame(opcode: int, payload: bytes, version: int = VERSION) -> bytes:
    if opcode not in _OPCODES:
        raise ProtocolError(f"unknown opcode {opcode}")
    return _HEADER.pack(MAGIC, version, opcode, len(payload)) + payload


def read_exact(stream, n: int) -> bytes:
    """Read exactly n bytes from a file-like or socket-like stream."""
    chunks = []
    remaining = n
    while remaining > 0:
        if hasattr(stream, "recv"):
            chunk = stream.recv(remaining)
        else:
            chunk = stream.read(remaining)
        if not chunk:
            raise ConnectionFailure("peer closed the stream mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(stream):
    """Read one frame; returns (opcode, payload)."""
    header = read_exact(stream, _HEADER.size)
    magic, version, opcode, length = _HEADER.unpack(header)
    if magic != MAGIC:
        raise ProtocolError(f"bad frame magic {magic!r}")
    if version != VERSION:
        raise VersionMismatch(f"protocol version {version}, expected {VERSION}")
    if opcode not in _OPCODES:
        raise ProtocolError(f"unknown opcode {opcode}")
    payload = read_exact(stream, length) if length else b""
    return opcode, payload


def pack_payload(arr, t: int, total_steps: int, planes: int) -> bytes:
    """Serialize a tensor (or None for a metadata-only payload)."""
    if arr is None:
        body = bytes([0])
        dtype_code = 0
        body += bytes([dtype_code])
    else:
        arr = np.asarray(arr)
        if arr.dtype not in _DTYPE_CODES:
            arr = arr.astype(np.float64)
        dtype_code = _DTYPE_CODES[arr.dtype]
        body = bytes([arr.ndim])
        body += struct.pack(f"<{arr.ndim}I", *arr.shape)
        body += bytes([dtype_code])
        body += np.ascontiguousarray(arr, dtype=_DTYPES[dtype_code]).tobytes()
    body += struct.pack("<III", t, total_steps, planes)
    return body


def unpack_payload(payload: bytes):
    """Inverse of :func:`pack_payload`; returns (array_or_None, t, T, m)."""
    try:
        rank = payload[0]
        offset = 1
        dims = struct.unpack_from(f"<{rank}I", payload, offset)
        offset += 4 * rank
        dtype_code = payload[offset]
        offset += 1
        if dtype_code not in _DTYPES:
            raise ProtocolError(f"unknown dtype code {dtype_code}")
        dtype = _DTYPES[dtype_code]
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
            raise ProtocolError("payload size does not match declared tensor")
        return arr, t, total_steps, planes
    except (IndexError, struct.error) as exc:
        raise ProtocolError(f"truncated payload: {exc}") from exc


def pack_error(message: str) -> bytes:
    return encode_frame(OP_ERROR, message.encode("utf-8"))


def connect(endpoint: str, timeout: float = 30.0) -> socket.socket:
    """Open a stream to 'host:port' or 'unix:/path'."""
    try:
        if endpoint.startswith("unix:"):
            sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            sock.settimeout(timeout)
            sock.connect(endpoint[5:])
        else:
            host, _, port = endpoint.rpartition(":")
            sock = socket.create_connection((host or "127.0.0.1", int(port)), timeout=timeout)
        return sock
    except (OSError, ValueError) as exc:
        raise ConnectionFailure(f"cannot connect to {endpoint!r}: {exc}") from exc


def request(sock, opcode: int, payload: bytes):
    """Send one frame and read the reply; error frames raise ProtocolError."""
    try:
        sock.sendall(encode_frame(opcode, payload))
    except OSError as exc:
        raise ConnectionFailure(f"send failed: {exc}") from exc
    try:
        reply_op, reply_payload = read_frame(sock)
    except socket.timeout as exc:
        raise ConnectionFailure(f"timeout waiting for reply: {exc}") from exc
    if reply_op == OP_ERROR:
        raise ProtocolError(f"peer error: {reply_payload.decode('utf-8', 'replace')}")
    if reply_op != opcode:
        raise ProtocolError(f"reply opcode {reply_op} does not match request {opcode}")
    return reply_payload


def expect_shape(arr, shape):
    if arr is None or tuple(arr.shape) != tuple(shape):
        got = None if arr is None else tuple(arr.shape)
        raise ShapeMismatch(f"expected tensor shape {tuple(shape)}, got {got}")
    return arr
