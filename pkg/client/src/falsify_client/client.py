"""Socket client for the falsify-kit episode protocol.

Frames are a 4-byte big-endian unsigned body length followed by a compact
UTF-8 JSON object with a "type" field; reals carry full round-trip
precision and NaN/Inf are forbidden on the wire.
"""

import json
import math
import socket
import struct

PROTOCOL_VERSION = "falsify-kit/1"
MAX_FRAME = 64 * 1024 * 1024


class ClientProtocolError(Exception):
    pass


class HandshakeRefused(ClientProtocolError):
    pass


class ProtocolViolation(ClientProtocolError):
    pass


def encode_frame(body):
    data = json.dumps(body, separators=(",", ":"), allow_nan=False).encode("utf-8")
    if len(data) > MAX_FRAME:
        raise ClientProtocolError(f"frame body of {len(data)} bytes too large")
    return struct.pack("!I", len(data)) + data


def _recv_exact(sock, n):
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ClientProtocolError("connection closed mid-frame")
        buf.extend(chunk)
    return bytes(buf)


def _reject_constant(token):
    raise ClientProtocolError(f"non-finite constant {token!r} on the wire")


def recv_frame(sock):
    (length,) = struct.unpack("!I", _recv_exact(sock, 4))
    if length > MAX_FRAME:
        raise ClientProtocolError(f"declared frame of {length} bytes too large")
    body = _recv_exact(sock, length)
    return json.loads(body.decode("utf-8"), parse_constant=_reject_constant)


def _validate_trace(times, signals):
    if len(times) < 1:
        raise ValueError("trace must contain at least one sample")
    previous = None
    for t in times:
        if not math.isfinite(t):
            raise ValueError("times must be finite")
        if previous is not None and not t > previous:
            raise ValueError("times must be strictly increasing")
        previous = t
    for name, values in signals.items():
        if len(values) != len(times):
            raise ValueError(f"signal {name!r} length mismatch")
        for v in values:
            if not math.isfinite(v):
                raise ValueError(f"signal {name!r} contains non-finite values")


def signature_from_domain_doc(doc):
    """Canonical space signature for a JSON domain tree (the "domain" value
    of a toolkit config). Must match the toolkit's own canonical form."""
    def normalize(node):
        if not isinstance(node, dict) or len(node) != 1:
            raise ValueError(f"not a domain document: {node!r}")
        key, body = next(iter(node.items()))
        if key == "box":
            return {"box": [[float(lo), float(hi)] for lo, hi in body]}
        if key == "set":
            return {"set": list(body)}
        if key == "struct":
            return {"struct": {name: normalize(sub) for name, sub in body.items()}}
        if key == "array":
            return {"array": {"element": normalize(body["element"]),
                              "length": int(body["length"])}}
        raise ValueError(f"unknown domain constructor {key!r}")
    return json.dumps(normalize(doc), separators=(",", ":"))


def connect_and_serve(host, port, space_signature, callback,
                      version=PROTOCOL_VERSION, timeout=300.0):
    """Serve episodes to a falsify-kit server until it says bye.

    callback(assignments) -> (times, signals) for one episode; exceptions
    it raises become sim_error messages and the session continues. Returns
    a summary dict with served episode and error counts.
    """
    with socket.create_connection((host, port), timeout=timeout) as sock:
        sock.sendall(encode_frame({"type": "hello", "version": version,
                                   "space_signature": space_signature}))
        ack = recv_frame(sock)
        if ack.get("type") != "hello_ack":
            raise ProtocolViolation(f"expected hello_ack, got {ack.get('type')!r}")
        if not ack.get("accepted"):
            raise HandshakeRefused(ack.get("reason", "refused"))
        episodes = 0
        errors = 0
        while True:
            msg = recv_frame(sock)
            mtype = msg.get("type")
            if mtype == "bye":
                return {"episodes": episodes, "errors": errors}
            if mtype != "config":
                raise ProtocolViolation(f"expected config, got {mtype!r}")
            run_id = msg["run_id"]
            try:
                times, signals = callback(msg["assignments"])
                _validate_trace(times, signals)
                reply = {"type": "trajectory", "run_id": run_id,
                         "times": [float(t) for t in times],
                         "signals": {name: [float(v) for v in values]
                                     for name, values in signals.items()}}
            except Exception as exc:
                reply = {"type": "sim_error", "run_id": run_id,
                         "message": f"{type(exc).__name__}: {exc}"}
                errors += 1
            else:
                episodes += 1
            sock.sendall(encode_frame(reply))
