"""Framed duplex channels: an in-memory pair for tests and a TCP socket wrapper."""

from __future__ import annotations

import queue
import socket
import threading
import time

from ..errors import FramingError, HandshakeError, ProtocolError, TransportError
from .framing import (HEADER, ErrorCode, Frame, MessageType, frame_decode, frame_encode,
                      parse_header)

DEFAULT_TIMEOUT = 60.0


class Channel:
    """Send and receive whole frames. Subclasses implement the byte transport."""

    def send(self, msg_type: MessageType, payload: bytes = b"") -> None:
        raise NotImplementedError

    def recv(self) -> Frame:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def expect(self, msg_type: MessageType) -> bytes:
        frame = self.recv()
        if frame.msg_type is MessageType.ERROR:
            code = frame.payload[0] if frame.payload else 0
            if code == ErrorCode.HANDSHAKE:
                raise HandshakeError("peer rejected the handshake")
            if code == ErrorCode.PROTOCOL:
                raise ProtocolError("peer aborted: protocol violation")
            raise TransportError(f"peer reported error code {code}")
        if frame.msg_type is not msg_type:
            raise ProtocolError(f"expected {msg_type.name}, got {frame.msg_type.name}")
        return frame.payload


class MemoryChannel(Channel):
    """One end of an in-process duplex pipe carrying encoded frames."""

    _CLOSED = object()

    def __init__(self, inbox: queue.Queue, outbox: queue.Queue, timeout: float = DEFAULT_TIMEOUT):
        self._inbox = inbox
        self._outbox = outbox
        self._timeout = timeout
        self._closed = False

    @classmethod
    def pair(cls, timeout: float = DEFAULT_TIMEOUT) -> tuple["MemoryChannel", "MemoryChannel"]:
        a, b = queue.Queue(), queue.Queue()
        return cls(a, b, timeout), cls(b, a, timeout)

    def send(self, msg_type, payload=b""):
        if self._closed:
            raise TransportError("channel closed")
        self._outbox.put(frame_encode(msg_type, payload))

    def recv(self):
        try:
            item = self._inbox.get(timeout=self._timeout)
        except queue.Empty:
            raise TransportError("timed out waiting for peer") from None
        if item is self._CLOSED:
            raise TransportError("peer closed the channel")
        return frame_decode(item)

    def close(self):
        if not self._closed:
            self._closed = True
            self._outbox.put(self._CLOSED)


class SocketChannel(Channel):
    def __init__(self, sock: socket.socket, timeout: float | None = DEFAULT_TIMEOUT):
        self.sock = sock
        sock.settimeout(timeout)
        if sock.family in (socket.AF_INET, socket.AF_INET6):
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._lock = threading.Lock()

    @classmethod
    def connect(cls, addr: tuple[str, int], timeout: float | None = DEFAULT_TIMEOUT):
        try:
            sock = socket.create_connection(addr, timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {addr[0]}:{addr[1]}: {exc}") from exc
        return cls(sock, timeout)

    def send(self, msg_type, payload=b""):
        data = frame_encode(msg_type, payload)
        try:
            with self._lock:
                self.sock.sendall(data)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def _read_exactly(self, n: int, at_boundary: bool = False) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            try:
                chunk = self.sock.recv(min(n - len(buf), 1 << 20))
            except OSError as exc:
                raise TransportError(f"receive failed: {exc}") from exc
            if not chunk:
                if at_boundary and not buf:
                    raise TransportError("peer closed the connection")
                raise FramingError(f"stream ended after {len(buf)} of {n} bytes")
            buf += chunk
        return bytes(buf)

    def recv(self):
        msg_type, n = parse_header(self._read_exactly(HEADER.size, at_boundary=True))
        return Frame(msg_type, self._read_exactly(n) if n else b"")

    def close(self):
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


class TranscriptRecorder(Channel):
    """Wraps a channel and logs ``(direction, msg_type, frame_length)`` for every frame."""

    def __init__(self, inner: Channel):
        self.inner = inner
        self.log: list[tuple[str, MessageType, int]] = []

    def send(self, msg_type, payload=b""):
        self.log.append(("send", MessageType(msg_type), len(payload) + 1))
        self.inner.send(msg_type, payload)

    def recv(self):
        frame = self.inner.recv()
        self.log.append(("recv", frame.msg_type, frame.length))
        return frame

    def close(self):
        self.inner.close()

    def shape(self, msg_type: MessageType | None = None) -> list[tuple[str, int, int]]:
        return [(d, int(t), n) for d, t, n in self.log if msg_type is None or t is msg_type]


class TimedChannel(Channel):
    """Accumulates the nanoseconds spent inside send and recv (waiting included).

    ``latency`` seconds are slept before every send to emulate a slower link.
    """

    def __init__(self, inner: Channel, latency: float = 0.0):
        self.inner = inner
        self.latency = latency
        self.nanos = 0

    def send(self, msg_type, payload=b""):
        start = time.perf_counter_ns()
        if self.latency:
            time.sleep(self.latency)
        self.inner.send(msg_type, payload)
        self.nanos += time.perf_counter_ns() - start

    def recv(self):
        start = time.perf_counter_ns()
        frame = self.inner.recv()
        self.nanos += time.perf_counter_ns() - start
        return frame

    def close(self):
        self.inner.close()
