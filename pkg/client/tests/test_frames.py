"""Frame bytes must match the toolkit's golden frames exactly."""

import json
import struct

import pytest

from falsify_client.client import (
    ClientProtocolError,
    encode_frame,
    recv_frame,
    signature_from_domain_doc,
)


def test_bye_golden_bytes():
    assert encode_frame({"type": "bye"}) == b"\x00\x00\x00\x0e" + b'{"type":"bye"}'


def test_hello_golden_bytes():
    body = b'{"type":"hello","version":"falsify-kit/1","space_signature":"sig"}'
    frame = encode_frame({"type": "hello", "version": "falsify-kit/1",
                          "space_signature": "sig"})
    assert frame == struct.pack("!I", len(body)) + body


def test_trajectory_golden_bytes():
    body = (b'{"type":"trajectory","run_id":0,"times":[0.0,0.1],'
            b'"signals":{"x":[1.0,-2.5]}}')
    frame = encode_frame({"type": "trajectory", "run_id": 0,
                          "times": [0.0, 0.1], "signals": {"x": [1.0, -2.5]}})
    assert frame == struct.pack("!I", len(body)) + body


def test_nan_rejected_on_encode():
    with pytest.raises(ValueError):
        encode_frame({"type": "trajectory", "run_id": 0,
                      "times": [float("nan")], "signals": {}})


def test_frame_round_trip_over_socketpair():
    import socket
    a, b = socket.socketpair()
    try:
        doc = {"type": "config", "run_id": 3,
               "assignments": {"x0.0": 0.125, "color": "red"}}
        a.sendall(encode_frame(doc))
        assert recv_frame(b) == doc
    finally:
        a.close()
        b.close()


def test_non_finite_constant_rejected_on_decode():
    import socket
    a, b = socket.socketpair()
    try:
        body = b'{"type":"trajectory","run_id":0,"times":[NaN],"signals":{}}'
        a.sendall(struct.pack("!I", len(body)) + body)
        with pytest.raises(ClientProtocolError):
            recv_frame(b)
    finally:
        a.close()
        b.close()


def test_signature_normalizes_integers_to_reals():
    sig = signature_from_domain_doc({"struct": {
        "x0": {"box": [[0, 1]]},
        "color": {"set": ["red", "orange"]},
        "cars": {"array": {"element": {"box": [[-0.5, 0.5]]}, "length": 2}},
    }})
    assert sig == ('{"struct":{"x0":{"box":[[0.0,1.0]]},'
                   '"color":{"set":["red","orange"]},'
                   '"cars":{"array":{"element":{"box":[[-0.5,0.5]]},"length":2}}}}')
    doc = json.loads(sig)
    assert doc["struct"]["x0"]["box"] == [[0.0, 1.0]]
