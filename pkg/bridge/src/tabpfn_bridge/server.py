"""Protocol server: one JSON message per line, one request in flight per
connection.

    -> {"type": "hello", "protocol": 1}
    <- {"type": "hello_ack", "protocol": 1, "name": "tabpfn-bridge",
        "capabilities": {...}}
    -> {"type": "predict", "request_id": N, "classes": K,
        "context": {"x": [[...]], "y": [...]}, "query": {"x": [[...]]}}
    <- {"type": "proba", "request_id": N, "p": [[...]]}
    <- {"type": "error", "request_id": N, "message": <text>}

A bad line or a bad request produces a typed error reply and leaves the
connection open; unknown fields in requests are ignored.
"""

from __future__ import annotations

import json
import logging
import socket
import threading

from . import PROTOCOL_VERSION, SERVER_NAME
from .backends import BackendError

log = logging.getLogger("tabpfn_bridge")


def _hello_ack(backend) -> dict:
    capabilities = dict(backend.metadata())
    capabilities.update({"absent_classes": "zero", "features": "as-sent"})
    return {
        "type": "hello_ack",
        "protocol": PROTOCOL_VERSION,
        "name": SERVER_NAME,
        "capabilities": capabilities,
    }


def _handle_predict(message: dict, backend) -> dict:
    request_id = message.get("request_id", 0)
    try:
        n_classes = int(message["classes"])
        context = message["context"]
        query = message["query"]
        context_x = context["x"]
        context_y = [int(v) for v in context["y"]]
        query_x = query["x"]
    except (KeyError, TypeError, ValueError) as exc:
        return {"type": "error", "request_id": request_id,
                "message": f"malformed predict request: {exc!r}"}
    if not context_x or not query_x:
        return {"type": "error", "request_id": request_id,
                "message": "context and query must be non-empty"}
    if len(context_x) != len(context_y):
        return {"type": "error", "request_id": request_id,
                "message": "context x and y lengths differ"}
    if n_classes < 2:
        return {"type": "error", "request_id": request_id,
                "message": "classes must be >= 2"}
    try:
        p = backend.predict(context_x, context_y, query_x, n_classes)
    except BackendError as exc:
        return {"type": "error", "request_id": request_id, "message": str(exc)}
    except Exception as exc:  # noqa: BLE001 - a bad request must not kill the connection
        log.exception("backend failure")
        return {"type": "error", "request_id": request_id,
                "message": f"backend failure: {exc}"}
    return {"type": "proba", "request_id": request_id, "p": p}


def handle_line(line: str, backend) -> dict | None:
    """One request in, one reply out (None for blank lines)."""
    line = line.strip()
    if not line:
        return None
    try:
        message = json.loads(line)
        if not isinstance(message, dict):
            raise ValueError("not a JSON object")
    except ValueError as exc:
        return {"type": "error", "request_id": 0, "message": f"unparseable line: {exc}"}
    kind = message.get("type")
    if kind == "hello":
        return _hello_ack(backend)
    if kind == "predict":
        return _handle_predict(message, backend)
    return {"type": "error", "request_id": message.get("request_id", 0),
            "message": f"unsupported message type {kind!r}"}


def serve_stream(rfile, wfile, backend) -> None:
    """Drive the protocol over a pair of text file objects until EOF."""
    for line in rfile:
        reply = handle_line(line, backend)
        if reply is None:
            continue
        wfile.write(json.dumps(reply) + "\n")
        wfile.flush()


def serve_stdio(backend) -> None:
    import sys

    serve_stream(sys.stdin, sys.stdout, backend)


def serve_tcp(backend, port: int, host: str = "127.0.0.1", ready_event=None, bound=None):
    """Accept loop; each connection gets its own thread (requests within a
    connection stay strictly sequential)."""
    server = socket.create_server((host, port))
    if bound is not None:
        bound.append(server.getsockname()[1])
    if ready_event is not None:
        ready_event.set()
    log.info("listening on %s:%d", host, server.getsockname()[1])

    def client(conn):
        with conn, conn.makefile("r", encoding="utf-8") as rfile, \
                conn.makefile("w", encoding="utf-8") as wfile:
            try:
                serve_stream(rfile, wfile, backend)
            except (BrokenPipeError, ConnectionResetError):
                pass

    with server:
        while True:
            conn, _ = server.accept()
            threading.Thread(target=client, args=(conn,), daemon=True).start()
