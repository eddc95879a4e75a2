"""Length-prefixed binary frames.

Layout (all integers little-endian)::

    u32 length | u8 msg_type | payload

``length`` counts the bytes that follow it, i.e. the type byte plus the
payload, so an empty HELLO encodes to ``01 00 00 00 01``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

from ..errors import FramingError, ProtocolError

HEADER = struct.Struct("<IB")
MAX_PAYLOAD = 1 << 24


class MessageType(IntEnum):
    HELLO = 1
    PERTURBED_SET = 2
    NOISY_INDEXES = 3
    SIZES = 4
    MASKED_OPENING = 5
    RESULT = 6
    ERROR = 7
    DEALER_POOL = 8


class ErrorCode(IntEnum):
    """First payload byte of an ERROR frame."""

    HANDSHAKE = 1
    PROTOCOL = 2
    INTERNAL = 3


@dataclass(frozen=True)
class Frame:
    msg_type: MessageType
    payload: bytes

    @property
    def length(self) -> int:
        return len(self.payload) + 1


def frame_encode(msg_type: MessageType | int, payload: bytes = b"") -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise ValueError(f"payload of {len(payload)} bytes exceeds the {MAX_PAYLOAD} limit")
    msg_type = MessageType(msg_type)
    return HEADER.pack(len(payload) + 1, msg_type) + bytes(payload)


def parse_header(header: bytes) -> tuple[MessageType, int]:
    """Validate a 5-byte header; return the message type and payload length."""
    if len(header) < HEADER.size:
        raise FramingError(f"truncated header ({len(header)} of {HEADER.size} bytes)")
    length, tag = HEADER.unpack(header[:HEADER.size])
    if length < 1 or length - 1 > MAX_PAYLOAD:
        raise FramingError(f"invalid frame length {length}")
    try:
        msg_type = MessageType(tag)
    except ValueError:
        raise ProtocolError(f"unknown message type {tag}") from None
    return msg_type, length - 1


def frame_decode(data: bytes) -> Frame:
    """Decode exactly one frame; trailing bytes are an error."""
    frame, used = frame_decode_prefix(data)
    if used != len(data):
        raise FramingError(f"{len(data) - used} trailing bytes after frame")
    return frame


def frame_decode_prefix(data: bytes) -> tuple[Frame, int]:
    """Decode the frame at the start of ``data``; return it and the bytes consumed."""
    msg_type, n = parse_header(data)
    end = HEADER.size + n
    if len(data) < end:
        raise FramingError(f"frame announces {n} payload bytes, only "
                           f"{len(data) - HEADER.size} available")
    return Frame(msg_type, bytes(data[HEADER.size:end])), end
