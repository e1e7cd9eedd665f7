"""Socket server: one denoiser session per connection."""

from __future__ import annotations

import logging
import os
import socket
import threading

from . import protocol as p
from .backends import BackendError

log = logging.getLogger("osrd_bridge")


class Session:
    """Drives one connection through the session protocol."""

    def __init__(self, sock: socket.socket, backend):
        self._sock = sock
        self._backend = backend
        self._shape = None
        self._total_steps = 0
        self._planes = 0

    def run(self) -> None:
        try:
            while self._serve_one():
                pass
        except (ConnectionError, OSError, p.ProtocolViolation) as exc:
            log.info("session ended: %s", exc)
        finally:
            self._sock.close()

    def _reply(self, opcode: int, arr, t: int = 0) -> None:
        payload = p.pack_payload(arr, t, self._total_steps, self._planes)
        self._sock.sendall(p.encode_frame(opcode, payload))

    def _serve_one(self) -> bool:
        version, opcode, payload = p.read_frame(self._sock)
        if version != p.VERSION:
            self._sock.sendall(
                p.error_frame(f"protocol version {version} unsupported, expected {p.VERSION}")
            )
            return False
        if opcode == p.OP_SHUTDOWN:
            self._reply(p.OP_SHUTDOWN, None)
            return False
        try:
            self._dispatch(opcode, payload)
        except (BackendError, p.ProtocolViolation) as exc:
            self._sock.sendall(p.error_frame(str(exc)))
        return True

    def _dispatch(self, opcode: int, payload: bytes) -> None:
        arr, t, total_steps, planes = p.unpack_payload(payload)
        if opcode == p.OP_HELLO:
            self._reply(p.OP_HELLO, None)
        elif opcode == p.OP_INIT:
            if arr is None or arr.ndim != 4:
                raise BackendError("init requires a rank-4 tensor (planes, h, w, channels)")
            self._shape = arr.shape
            self._total_steps = int(total_steps)
            self._planes = int(planes)
            self._backend.init(arr, total_steps)
            self._reply(p.OP_INIT, None, t)
        elif opcode == p.OP_PREDICT:
            out = self._backend.predict(t)
            self._check_shape(out)
            self._reply(p.OP_PREDICT, out, t)
        elif opcode == p.OP_ADVANCE:
            if arr is None:
                raise BackendError("advance requires the blended tensor")
            self._backend.advance(arr, t)
            self._reply(p.OP_ADVANCE, None, t)
        elif opcode == p.OP_FINALIZE:
            out = self._backend.finalize()
            self._check_shape(out)
            self._reply(p.OP_FINALIZE, out)
        else:
            raise BackendError(f"unexpected opcode {opcode}")

    def _check_shape(self, out) -> None:
        if self._shape is not None and tuple(out.shape) != tuple(self._shape):
            raise BackendError(
                f"backend produced shape {tuple(out.shape)}, session expects {tuple(self._shape)}"
            )


class Server:
    """Listening server; accepts connections until ``close`` is called."""

    def __init__(self, endpoint: str, backend_factory):
        self._backend_factory = backend_factory
        self._endpoint = endpoint
        self._unix_path = None
        if endpoint.startswith("unix:"):
            self._unix_path = endpoint[5:]
            if os.path.exists(self._unix_path):
                os.unlink(self._unix_path)
            self._listener = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            self._listener.bind(self._unix_path)
        else:
            host, _, port = endpoint.rpartition(":")
            self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            self._listener.bind((host or "127.0.0.1", int(port)))
        self._listener.listen()
        self._closed = False

    @property
    def endpoint(self) -> str:
        """Endpoint in client syntax, with the bound port resolved."""
        if self._unix_path is not None:
            return f"unix:{self._unix_path}"
        host, port = self._listener.getsockname()
        return f"{host}:{port}"

    def serve_forever(self) -> None:
        while not self._closed:
            try:
                conn, _ = self._listener.accept()
            except OSError:
                break  # listener closed
            backend = self._backend_factory()
            thread = threading.Thread(target=Session(conn, backend).run, daemon=True)
            thread.start()

    def close(self) -> None:
        self._closed = True
        self._listener.close()
        if self._unix_path is not None and os.path.exists(self._unix_path):
            os.unlink(self._unix_path)


def serve(endpoint: str, backend_factory) -> Server:
    """Bind and start accepting in a background thread; returns the server."""
    server = Server(endpoint, backend_factory)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    return server
