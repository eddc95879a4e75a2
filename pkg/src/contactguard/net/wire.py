"""Payload codecs for each message type. Integers are little-endian throughout."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import HandshakeError, ProtocolError
from ..model import ContactParams, TemporalMode
from ..secure.fixedpoint import encode_array, decode_array
from .channel import Channel
from .framing import MAX_PAYLOAD, ErrorCode, MessageType  # noqa: F401 (re-export)

PROTOCOL_VERSION = 1
DEFAULT_PORT = 7309

METHOD_CODES = {"mpc": 1, "geoi": 2, "cg": 3}
METHOD_NAMES = {v: k for k, v in METHOD_CODES.items()}


_HELLO = struct.Struct("<BBQ")
_HELLO_REPLY = struct.Struct("<BBQdqB")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


@dataclass(frozen=True)
class Hello:
    version: int
    method: str
    user_id: int


def encode_hello(method: str, user_id: int, version: int = PROTOCOL_VERSION) -> bytes:
    return _HELLO.pack(version, METHOD_CODES[method], user_id)


def decode_hello(payload: bytes) -> Hello:
    if len(payload) != _HELLO.size:
        raise HandshakeError(f"HELLO of {len(payload)} bytes")
    version, code, uid = _HELLO.unpack(payload)
    if code not in METHOD_NAMES:
        raise HandshakeError(f"unknown method code {code}")
    return Hello(version, METHOD_NAMES[code], uid)


def encode_hello_reply(hello: Hello, params: ContactParams) -> bytes:
    mode = 0 if params.temporal_mode is TemporalMode.PATIENT_EARLIER else 1
    return _HELLO_REPLY.pack(hello.version, METHOD_CODES[hello.method], hello.user_id,
                             params.r, int(params.delta), mode)


def check_hello_reply(payload: bytes, sent: Hello, params: ContactParams) -> None:
    """The server echoes version, method and user id, and announces its public thresholds."""
    if len(payload) != _HELLO_REPLY.size:
        raise HandshakeError(f"HELLO reply of {len(payload)} bytes")
    version, code, uid, r, delta, mode = _HELLO_REPLY.unpack(payload)
    if version != sent.version:
        raise HandshakeError(f"server speaks protocol version {version}, client {sent.version}")
    if METHOD_NAMES.get(code) != sent.method or uid != sent.user_id:
        raise HandshakeError("server did not echo the requested method and user id")
    ours = (params.r, int(params.delta),
            0 if params.temporal_mode is TemporalMode.PATIENT_EARLIER else 1)
    if (r, delta, mode) != ours:
        raise HandshakeError(f"server thresholds (r={r}, delta={delta}, mode={mode}) "
                             f"differ from the client's {ours}")


def encode_points(points: np.ndarray) -> bytes:
    raw = encode_array(np.asarray(points, dtype=np.float64).reshape(-1, 2))
    return _U32.pack(raw.shape[0]) + raw.astype("<u8").tobytes()


def decode_points(payload: bytes) -> np.ndarray:
    if len(payload) < _U32.size:
        raise ProtocolError("truncated PERTURBED_SET")
    (n,) = _U32.unpack_from(payload)
    if len(payload) != _U32.size + 16 * n:
        raise ProtocolError(f"PERTURBED_SET announces {n} points in {len(payload)} bytes")
    raw = np.frombuffer(payload, dtype="<u8", offset=_U32.size).astype(np.uint64)
    return decode_array(raw).reshape(n, 2)


def encode_indexes(indexes, universe: int) -> bytes:
    idx = np.asarray(indexes, dtype="<u4")
    return _U32.pack(universe) + _U32.pack(idx.size) + idx.tobytes()


def decode_indexes(payload: bytes) -> tuple[tuple[int, ...], int]:
    if len(payload) < 8:
        raise ProtocolError("truncated NOISY_INDEXES")
    universe, n = struct.unpack_from("<II", payload)
    if len(payload) != 8 + 4 * n:
        raise ProtocolError(f"NOISY_INDEXES announces {n} entries in {len(payload)} bytes")
    return tuple(int(i) for i in np.frombuffer(payload, dtype="<u4", offset=8)), universe


def encode_size(n: int) -> bytes:
    return _U64.pack(n)


def decode_size(payload: bytes) -> int:
    if len(payload) != _U64.size:
        raise ProtocolError("SIZES payload must be 8 bytes")
    return _U64.unpack(payload)[0]


def encode_result(flag: bool) -> bytes:
    return b"\x01" if flag else b"\x00"


def decode_result(payload: bytes) -> bool:
    if payload not in (b"\x00", b"\x01"):
        raise ProtocolError(f"malformed RESULT {payload!r}")
    return payload == b"\x01"


_POOL_CHUNK = MAX_PAYLOAD - _U64.size


def send_pool(channel: Channel, data: bytes) -> None:
    """Send serialized dealer material; every frame carries the total byte count first."""
    total = _U64.pack(len(data))
    for start in range(0, max(len(data), 1), _POOL_CHUNK):
        channel.send(MessageType.DEALER_POOL, total + data[start:start + _POOL_CHUNK])


def recv_pool(channel: Channel) -> bytes:
    buf = bytearray()
    total = None
    while total is None or len(buf) < total:
        payload = channel.expect(MessageType.DEALER_POOL)
        (n,) = _U64.unpack_from(payload)
        if total is not None and n != total:
            raise ProtocolError("inconsistent DEALER_POOL length")
        total = n
        buf += payload[_U64.size:]
        if total == 0:
            break
    if len(buf) != total:
        raise ProtocolError("DEALER_POOL overran its announced length")
    return bytes(buf)
