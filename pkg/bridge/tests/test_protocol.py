"""Conformance tests driving the bridge over its wire protocol with the stub
backend; nothing here depends on the tabpfn package."""

import json
import socket
import subprocess
import sys
import threading

import numpy as np
import pytest

from tabpfn_bridge.backends import StubBackend
from tabpfn_bridge.server import handle_line, serve_tcp


class StdioClient:
    """Minimal protocol client for a spawned bridge process."""

    def __init__(self, *args):
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "tabpfn_bridge", *args],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
        )

    def send(self, payload):
        self.proc.stdin.write(json.dumps(payload) + "\n")
        self.proc.stdin.flush()

    def send_raw(self, line):
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()

    def recv(self):
        line = self.proc.stdout.readline()
        assert line, "server closed the connection"
        return json.loads(line)

    def close(self):
        self.proc.terminate()
        self.proc.wait(timeout=10)


@pytest.fixture
def client():
    c = StdioClient("--stdio", "--backend", "stub")
    yield c
    c.close()


def predict_request(rid, context_x, context_y, query_x, classes):
    return {
        "type": "predict",
        "request_id": rid,
        "classes": classes,
        "context": {"x": context_x, "y": context_y},
        "query": {"x": query_x},
    }


class TestHandshake:
    def test_hello_ack(self, client):
        client.send({"type": "hello", "protocol": 1})
        ack = client.recv()
        assert ack["type"] == "hello_ack"
        assert ack["protocol"] == 1
        assert ack["name"] == "tabpfn-bridge"
        assert ack["capabilities"]["backend"] == "stub"

    def test_unknown_fields_ignored(self, client):
        client.send({"type": "hello", "protocol": 1, "frobnicate": True})
        assert client.recv()["type"] == "hello_ack"


class TestPredict:
    def test_thousand_row_round_trip(self, client):
        rng = np.random.default_rng(0)
        client.send({"type": "hello", "protocol": 1})
        client.recv()
        context_x = rng.normal(size=(50, 4)).tolist()
        context_y = rng.integers(0, 3, size=50).tolist()
        query_x = rng.normal(size=(1000, 4)).tolist()
        client.send(predict_request(7, context_x, context_y, query_x, 3))
        reply = client.recv()
        assert reply["type"] == "proba"
        assert reply["request_id"] == 7
        p = np.asarray(reply["p"], dtype=float)
        assert p.shape == (1000, 3)
        assert (p >= 0).all() and (p <= 1).all()
        assert np.abs(p.sum(axis=1) - 1).max() < 1e-6

    def test_deterministic_replies(self, client):
        request = predict_request(1, [[0.0, 1.0]], [0], [[0.5, -0.5], [2.0, 0.1]], 2)
        client.send(request)
        first = client.recv()
        request["request_id"] = 2
        client.send(request)
        second = client.recv()
        assert first["p"] == second["p"]

    def test_empty_context_rejected_politely(self, client):
        client.send(predict_request(3, [], [], [[1.0]], 2))
        reply = client.recv()
        assert reply["type"] == "error"
        assert reply["request_id"] == 3


class TestRobustness:
    def test_malformed_line_recovery(self, client):
        client.send_raw("this is { not json")
        err = client.recv()
        assert err["type"] == "error"
        assert "unparseable" in err["message"]
        # the connection must survive the bad line
        client.send(predict_request(9, [[1.0]], [0], [[2.0]], 2))
        assert client.recv()["type"] == "proba"

    def test_unsupported_type(self, client):
        client.send({"type": "shutdown", "request_id": 4})
        reply = client.recv()
        assert reply["type"] == "error"
        assert reply["request_id"] == 4

    def test_missing_fields_reported(self, client):
        client.send({"type": "predict", "request_id": 5, "classes": 2})
        reply = client.recv()
        assert reply["type"] == "error"
        assert "malformed" in reply["message"]

    def test_single_class_count_rejected(self, client):
        client.send(predict_request(6, [[1.0]], [0], [[2.0]], 1))
        reply = client.recv()
        assert reply["type"] == "error"


class TestHandleLineUnit:
    def test_blank_line_is_ignored(self):
        assert handle_line("   \n", StubBackend()) is None

    def test_probabilities_use_request_class_order(self):
        reply = handle_line(
            json.dumps(predict_request(1, [[1.0, 2.0]], [1], [[1.0, -1.0]], 3)),
            StubBackend(),
        )
        assert reply["type"] == "proba"
        assert len(reply["p"][0]) == 3


class TestTcp:
    def test_round_trip(self):
        ready = threading.Event()
        bound = []
        thread = threading.Thread(
            target=serve_tcp,
            args=(StubBackend(), 0),
            kwargs={"ready_event": ready, "bound": bound},
            daemon=True,
        )
        thread.start()
        assert ready.wait(timeout=10)
        with socket.create_connection(("127.0.0.1", bound[0]), timeout=10) as conn:
            rfile = conn.makefile("r", encoding="utf-8")
            wfile = conn.makefile("w", encoding="utf-8")
            wfile.write(json.dumps({"type": "hello", "protocol": 1}) + "\n")
            wfile.flush()
            ack = json.loads(rfile.readline())
            assert ack["name"] == "tabpfn-bridge"
            wfile.write(json.dumps(predict_request(1, [[1.0]], [0], [[0.3]], 2)) + "\n")
            wfile.flush()
            reply = json.loads(rfile.readline())
            assert reply["type"] == "proba"
            assert abs(sum(reply["p"][0]) - 1) < 1e-9
