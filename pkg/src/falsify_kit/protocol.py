"""Client-server simulator protocol.

The toolkit is the TCP server; the simulator connects as a client, answers
a signature handshake, then serves one episode per Config message. Frames
are a 4-byte big-endian unsigned body length followed by a UTF-8 JSON body
whose "type" field selects the message. NaN/Inf are forbidden on the wire.
"""

import json
import math
import socket
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BindError,
    ConnectionLost,
    FrameTooLarge,
    HandshakeRefused,
    MalformedJson,
    ProtocolViolation,
    SimulatorError,
    Timeout,
    UnknownType,
    WireLengthMismatch,
)
from .mtl import Trace
from .space import domain_to_json

PROTOCOL_VERSION = "falsify-kit/1"
MAX_FRAME = 64 * 1024 * 1024
DEFAULT_PORT = 8200
DEFAULT_TIMEOUT = 300.0


# ---------------------------------------------------------------------------
# Messages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Hello:
    version: str
    space_signature: str


@dataclass(frozen=True)
class HelloAck:
    accepted: bool
    reason: str = ""


@dataclass(frozen=True)
class Config:
    run_id: int
    assignments: dict


@dataclass(frozen=True)
class Trajectory:
    run_id: int
    times: tuple
    signals: dict

    def __eq__(self, other):
        return (isinstance(other, Trajectory) and self.run_id == other.run_id
                and list(self.times) == list(other.times)
                and {k: list(v) for k, v in self.signals.items()}
                == {k: list(v) for k, v in other.signals.items()})


@dataclass(frozen=True)
class SimError:
    run_id: int
    message: str


@dataclass(frozen=True)
class Bye:
    pass


WireMessage = Hello | HelloAck | Config | Trajectory | SimError | Bye


def space_signature(space):
    """Canonical domain-tree string; distributions and constraints excluded.
    Equal spaces produce equal signatures."""
    return json.dumps(domain_to_json(space.root), separators=(",", ":"))


def _to_body(msg):
    if isinstance(msg, Hello):
        return {"type": "hello", "version": msg.version,
                "space_signature": msg.space_signature}
    if isinstance(msg, HelloAck):
        return {"type": "hello_ack", "accepted": msg.accepted, "reason": msg.reason}
    if isinstance(msg, Config):
        return {"type": "config", "run_id": msg.run_id,
                "assignments": dict(msg.assignments)}
    if isinstance(msg, Trajectory):
        return {"type": "trajectory", "run_id": msg.run_id,
                "times": list(msg.times),
                "signals": {k: list(v) for k, v in msg.signals.items()}}
    if isinstance(msg, SimError):
        return {"type": "sim_error", "run_id": msg.run_id, "message": msg.message}
    if isinstance(msg, Bye):
        return {"type": "bye"}
    raise UnknownType(f"not a wire message: {msg!r}")


def _check_finite(value, where):
    if isinstance(value, float) and not math.isfinite(value):
        raise MalformedJson(f"non-finite real in {where}")
    return value


def _from_body(doc):
    if not isinstance(doc, dict):
        raise MalformedJson("message body must be a JSON object")
    mtype = doc.get("type")
    try:
        if mtype == "hello":
            return Hello(str(doc["version"]), str(doc["space_signature"]))
        if mtype == "hello_ack":
            return HelloAck(bool(doc["accepted"]), str(doc.get("reason", "")))
        if mtype == "config":
            assignments = {str(k): _check_finite(v, "assignments")
                           for k, v in doc["assignments"].items()}
            return Config(int(doc["run_id"]), assignments)
        if mtype == "trajectory":
            times = tuple(_check_finite(float(t), "times") for t in doc["times"])
            signals = {str(k): tuple(_check_finite(float(v), f"signal {k}") for v in vs)
                       for k, vs in doc["signals"].items()}
            return Trajectory(int(doc["run_id"]), times, signals)
        if mtype == "sim_error":
            return SimError(int(doc["run_id"]), str(doc["message"]))
        if mtype == "bye":
            return Bye()
    except MalformedJson:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedJson(f"bad {mtype} message: {exc}") from None
    raise UnknownType(f"unknown message type {mtype!r}")


def encode(msg):
    """Message -> framed bytes (length prefix + compact JSON)."""
    try:
        body = json.dumps(_to_body(msg), separators=(",", ":"),
                          allow_nan=False).encode("utf-8")
    except ValueError as exc:
        raise MalformedJson(f"cannot encode non-finite reals: {exc}") from None
    if len(body) > MAX_FRAME:
        raise FrameTooLarge(f"body of {len(body)} bytes exceeds {MAX_FRAME}")
    return struct.pack("!I", len(body)) + body


def _reject_constant(token):
    raise MalformedJson(f"non-finite constant {token!r} on the wire")


def decode_body(body):
    """Frame body bytes -> message."""
    try:
        doc = json.loads(body.decode("utf-8"), parse_constant=_reject_constant)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedJson(str(exc)) from None
    return _from_body(doc)


def decode(data):
    """Full frame bytes -> message; checks the length prefix."""
    if len(data) < 4:
        raise WireLengthMismatch("frame shorter than the 4-byte length prefix")
    (length,) = struct.unpack("!I", data[:4])
    if length > MAX_FRAME:
        raise FrameTooLarge(f"declared body of {length} bytes exceeds {MAX_FRAME}")
    if len(data) - 4 != length:
        raise WireLengthMismatch(f"declared {length} body bytes, got {len(data) - 4}")
    return decode_body(data[4:])


# ---------------------------------------------------------------------------
# Socket helpers
# ---------------------------------------------------------------------------

def _recv_exact(sock, n):
    buf = bytearray()
    while len(buf) < n:
        try:
            chunk = sock.recv(n - len(buf))
        except socket.timeout:
            if buf:
                raise WireLengthMismatch(
                    f"timed out mid-frame after {len(buf)}/{n} bytes") from None
            raise Timeout("timed out waiting for a frame") from None
        if not chunk:
            if buf:
                raise WireLengthMismatch(
                    f"connection closed mid-frame after {len(buf)}/{n} bytes")
            raise ConnectionLost("connection closed")
        buf.extend(chunk)
    return bytes(buf)


def send_message(sock, msg):
    sock.sendall(encode(msg))


def recv_message(sock):
    header = _recv_exact(sock, 4)
    (length,) = struct.unpack("!I", header)
    if length > MAX_FRAME:
        raise FrameTooLarge(f"declared body of {length} bytes exceeds {MAX_FRAME}")
    return decode_body(_recv_exact(sock, length))


# ---------------------------------------------------------------------------
# Server side (the toolkit)
# ---------------------------------------------------------------------------

class EpisodeServer:
    """Accepts one simulator client and serves episodes sequentially.

    Exactly one outstanding run_id at a time; wrong run_ids or message
    types are protocol violations.
    """

    def __init__(self, space, host="127.0.0.1", port=DEFAULT_PORT,
                 timeout=DEFAULT_TIMEOUT):
        self.signature = space_signature(space)
        self.timeout = timeout
        try:
            self._listener = socket.create_server((host, port))
        except OSError as exc:
            raise BindError(f"cannot bind {host}:{port}: {exc}") from None
        self._listener.settimeout(timeout)
        self.address = self._listener.getsockname()
        self._conn = None

    def accept_and_handshake(self):
        try:
            conn, _ = self._listener.accept()
        except socket.timeout:
            raise Timeout("no simulator client connected") from None
        conn.settimeout(self.timeout)
        msg = recv_message(conn)
        if not isinstance(msg, Hello):
            send_message(conn, HelloAck(False, "expected hello"))
            conn.close()
            raise HandshakeRefused(f"client opened with {type(msg).__name__}")
        if msg.version != PROTOCOL_VERSION:
            send_message(conn, HelloAck(False, f"version {msg.version!r} unsupported"))
            conn.close()
            raise HandshakeRefused(f"client version {msg.version!r}")
        if msg.space_signature != self.signature:
            send_message(conn, HelloAck(False, "space signature mismatch"))
            conn.close()
            raise HandshakeRefused("space signature mismatch")
        send_message(conn, HelloAck(True, ""))
        self._conn = conn
        return conn

    def serve_episode(self, run_id, point):
        """Send one Config, block for the matching Trajectory (or surface a
        SimError from the client as SimulatorError)."""
        if self._conn is None:
            raise ProtocolViolation("no simulator client connected")
        send_message(self._conn, Config(run_id, dict(point.assignments)))
        msg = recv_message(self._conn)
        if isinstance(msg, Trajectory):
            if msg.run_id != run_id:
                raise ProtocolViolation(
                    f"trajectory for run {msg.run_id}, expected {run_id}")
            try:
                return Trace(np.array(msg.times), {k: np.array(v)
                                                   for k, v in msg.signals.items()})
            except Exception as exc:
                raise ProtocolViolation(f"trajectory violates trace invariants: "
                                        f"{exc}") from exc
        if isinstance(msg, SimError):
            if msg.run_id != run_id:
                raise ProtocolViolation(
                    f"sim_error for run {msg.run_id}, expected {run_id}")
            raise SimulatorError(msg.message, run_id=run_id)
        raise ProtocolViolation(f"expected trajectory, got {type(msg).__name__}")

    def close(self):
        if self._conn is not None:
            try:
                send_message(self._conn, Bye())
            except OSError:
                pass
            self._conn.close()
            self._conn = None
        self._listener.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ---------------------------------------------------------------------------
# Client side (bundled loopback adapter)
# ---------------------------------------------------------------------------

def serve_simulator(host, port, space_sig, simulate, timeout=DEFAULT_TIMEOUT):
    """Connect to a toolkit server and answer Configs with the given
    simulator callable (assignments -> Trace) until Bye.

    Simulator exceptions become SimError messages; the loop continues.
    Returns (episodes served, errors sent).
    """
    with socket.create_connection((host, port), timeout=timeout) as sock:
        send_message(sock, Hello(PROTOCOL_VERSION, space_sig))
        ack = recv_message(sock)
        if not isinstance(ack, HelloAck) or not ack.accepted:
            reason = ack.reason if isinstance(ack, HelloAck) else "bad ack"
            raise HandshakeRefused(f"server refused handshake: {reason}")
        episodes = 0
        errors = 0
        while True:
            msg = recv_message(sock)
            if isinstance(msg, Bye):
                return episodes, errors
            if not isinstance(msg, Config):
                raise ProtocolViolation(f"expected config, got {type(msg).__name__}")
            try:
                trace = simulate(msg.assignments)
                reply = Trajectory(msg.run_id, tuple(float(t) for t in trace.times),
                                   {k: tuple(float(x) for x in v)
                                    for k, v in trace.signals.items()})
            except Exception as exc:
                reply = SimError(msg.run_id, f"{type(exc).__name__}: {exc}")
                errors += 1
            else:
                episodes += 1
            send_message(sock, reply)
