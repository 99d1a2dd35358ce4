"""Client for out-of-process predictor servers.

Wire format: newline-delimited JSON (UTF-8) over the stdio of a spawned
subprocess or a TCP socket. One request is in flight at a time and responses
are matched by request_id. Responses failing the probability contract abort
the run; nothing is repaired client-side.

    -> {"type": "hello", "protocol": 1}
    <- {"type": "hello_ack", "protocol": 1, "name": <text>}
    -> {"type": "predict", "request_id": N, "classes": K,
        "context": {"x": [[...]], "y": [...]}, "query": {"x": [[...]]}}
    <- {"type": "proba", "request_id": N, "p": [[...]]}
    <- {"type": "error", "request_id": N, "message": <text>}

Unknown fields are ignored on receipt.
"""

from __future__ import annotations

import json
import os
import select
import socket
import subprocess
import time

import numpy as np

from .base import PredictorError, validate_probability_matrix

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 300.0


class ProtocolError(PredictorError):
    """The remote end violated the wire protocol."""


class _StdioTransport:
    def __init__(self, command):
        self.proc = subprocess.Popen(
            list(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )
        self._buffer = b""

    def send_line(self, line: str) -> None:
        try:
            self.proc.stdin.write(line.encode("utf-8") + b"\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"server pipe closed: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        fd = self.proc.stdout.fileno()
        deadline = time.monotonic() + timeout
        while b"\n" not in self._buffer:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ProtocolError(f"timed out after {timeout:g}s waiting for server")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(fd, 65536)
            if not chunk:
                raise ProtocolError("server closed the connection")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line.decode("utf-8")

    def close(self) -> None:
        if self.proc.poll() is None:
            self.proc.terminate()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()


class _TcpTransport:
    def __init__(self, address: str):
        host, _, port = address.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"address must look like host:port, got {address!r}")
        self.sock = socket.create_connection((host, int(port)))
        self._buffer = b""

    def send_line(self, line: str) -> None:
        try:
            self.sock.sendall(line.encode("utf-8") + b"\n")
        except OSError as exc:
            raise ProtocolError(f"socket send failed: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        deadline = time.monotonic() + timeout
        while b"\n" not in self._buffer:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ProtocolError(f"timed out after {timeout:g}s waiting for server")
            self.sock.settimeout(remaining)
            try:
                chunk = self.sock.recv(65536)
            except socket.timeout:
                raise ProtocolError(f"timed out after {timeout:g}s waiting for server")
            except OSError as exc:
                raise ProtocolError(f"socket receive failed: {exc}") from exc
            if not chunk:
                raise ProtocolError("server closed the connection")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line.decode("utf-8")

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class ExternalPredictor:
    """Connects lazily, handshakes once, then serves strictly sequential
    predict requests for the lifetime of the connection."""

    def __init__(self, command=None, address=None, timeout: float = DEFAULT_TIMEOUT):
        if (command is None) == (address is None):
            raise ValueError("specify exactly one of command (stdio) or address (tcp)")
        if address is not None:
            host, _, port = address.rpartition(":")
            if not host or not port.isdigit():
                raise ValueError(f"address must look like host:port, got {address!r}")
        self._command = command
        self._address = address
        self.timeout = timeout
        self._transport = None
        self._next_id = 0
        self.server_name = None

    def _recv_message(self) -> dict:
        line = self._transport.recv_line(self.timeout)
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed JSON from server: {line[:200]!r}") from exc
        if not isinstance(message, dict):
            raise ProtocolError("server message is not a JSON object")
        return message

    def connect(self) -> None:
        if self._transport is not None:
            return
        if self._command is not None:
            self._transport = _StdioTransport(self._command)
        else:
            self._transport = _TcpTransport(self._address)
        self._transport.send_line(json.dumps({"type": "hello", "protocol": PROTOCOL_VERSION}))
        ack = self._recv_message()
        if ack.get("type") != "hello_ack":
            raise ProtocolError(f"expected hello_ack, got {ack.get('type')!r}")
        if ack.get("protocol") != PROTOCOL_VERSION:
            raise ProtocolError(
                f"protocol version mismatch: server speaks {ack.get('protocol')!r}, "
                f"client speaks {PROTOCOL_VERSION}"
            )
        self.server_name = ack.get("name")

    def predict_proba(self, context_x, context_y, query_x, n_classes: int) -> np.ndarray:
        self.connect()
        context_x = np.asarray(context_x, dtype=float)
        query_x = np.asarray(query_x, dtype=float)
        request_id = self._next_id
        self._next_id += 1
        request = {
            "type": "predict",
            "request_id": request_id,
            "classes": int(n_classes),
            "context": {
                "x": context_x.tolist(),
                "y": [int(v) for v in np.asarray(context_y)],
            },
            "query": {"x": query_x.tolist()},
        }
        self._transport.send_line(json.dumps(request))
        reply = self._recv_message()
        kind = reply.get("type")
        if kind == "error":
            raise PredictorError(f"server error: {reply.get('message')}")
        if kind != "proba":
            raise ProtocolError(f"expected proba, got {kind!r}")
        if reply.get("request_id") != request_id:
            raise ProtocolError(
                f"response request_id {reply.get('request_id')!r} does not match {request_id}"
            )
        try:
            p = np.asarray(reply["p"], dtype=float)
        except (KeyError, ValueError) as exc:
            raise ProtocolError(f"unusable probability payload: {exc}") from exc
        return validate_probability_matrix(p, query_x.shape[0], n_classes)

    def close(self) -> None:
        if self._transport is not None:
            self._transport.close()
            self._transport = None

    def __enter__(self):
        self.connect()
        return self

    def __exit__(self, *exc_info):
        self.close()
