"""One party's endpoint of a two-party computation."""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace

import numpy as np

from ..errors import ProtocolError
from ..net.channel import Channel, MemoryChannel, TranscriptRecorder
from ..net.framing import MessageType
from ..net.framing import MAX_PAYLOAD
from .sharing import SERVER, USER, Dealer, Pool

_CHUNK = MAX_PAYLOAD // 8


@dataclass
class OpCounter:
    secure_mults: int = 0
    secure_cmps: int = 0
    oblivious_loads: int = 0

    def snapshot(self) -> "OpCounter":
        return replace(self)

    def add(self, other: "OpCounter") -> None:
        self.secure_mults += other.secure_mults
        self.secure_cmps += other.secure_cmps
        self.oblivious_loads += other.oblivious_loads


class SecureSession:
    """Role, channel, dealer material and operation counters of one party.

    Openings are lock-step: the server sends first and then receives, the user
    does the opposite, so a blocking transport never deadlocks.
    """

    def __init__(self, role: int, channel: Channel, rng: np.random.Generator | None = None,
                 pool: Pool | None = None):
        if role not in (SERVER, USER):
            raise ValueError(f"role must be {SERVER} (server) or {USER} (user)")
        self.role = role
        self.channel = channel
        self.rng = rng if rng is not None else np.random.default_rng()
        self.pool = pool
        self.counter = OpCounter()

    def provision(self, pool: Pool) -> None:
        self.pool = pool

    def require_pool(self) -> Pool:
        if self.pool is None:
            raise ProtocolError("session has no dealer material")
        return self.pool

    def exchange(self, values: np.ndarray, expect: int | None = None) -> np.ndarray:
        """Send our ``uint64`` vector and return the peer's ``expect`` elements.

        Vectors larger than one frame are split into consecutive frames.
        """
        values = np.ascontiguousarray(values, dtype="<u8").ravel()
        expect = values.size if expect is None else expect
        if self.role == SERVER:
            self._send_vector(values)
            return self._recv_vector(expect)
        reply = self._recv_vector(expect)
        self._send_vector(values)
        return reply

    def _send_vector(self, values: np.ndarray) -> None:
        for start in range(0, max(values.size, 1), _CHUNK):
            self.channel.send(MessageType.MASKED_OPENING, values[start:start + _CHUNK].tobytes())

    def _recv_vector(self, n: int) -> np.ndarray:
        parts = []
        for start in range(0, max(n, 1), _CHUNK):
            want = min(_CHUNK, n - start)
            payload = self.channel.expect(MessageType.MASKED_OPENING)
            if len(payload) != 8 * want:
                raise ProtocolError(f"masked opening of {len(payload)} bytes, expected {8 * want}")
            parts.append(np.frombuffer(payload, dtype="<u8"))
        return np.concatenate(parts).astype(np.uint64) if parts else np.zeros(0, np.uint64)

    def open(self, shares: np.ndarray) -> np.ndarray:
        shares = np.asarray(shares, dtype=np.uint64)
        peer = self.exchange(shares.ravel())
        return shares + peer.reshape(shares.shape)

    def public(self, value) -> np.ndarray:
        """This party's share of a public constant."""
        value = np.asarray(value).astype(np.uint64)
        return value if self.role == SERVER else np.zeros_like(value)


class LocalSession:
    """Both parties of a computation in one process, joined by a memory channel.

    ``counter`` is the server's counter; both parties count identically.
    """

    def __init__(self, rng: np.random.Generator | None = None, record: bool = False,
                 timeout: float = 60.0):
        rng = rng if rng is not None else np.random.default_rng()
        a, b = MemoryChannel.pair(timeout=timeout)
        if record:
            a, b = TranscriptRecorder(a), TranscriptRecorder(b)
        seeds = rng.spawn(3)
        self.server = SecureSession(SERVER, a, seeds[0])
        self.user = SecureSession(USER, b, seeds[1])
        self.dealer = Dealer(seeds[2])

    @property
    def counter(self) -> OpCounter:
        return self.server.counter

    def provision(self, n_triples: int, n_masks: int) -> None:
        p1, p2 = self.dealer.provision(n_triples, n_masks)
        self.server.provision(p1)
        self.user.provision(p2)

    def run(self, server_fn, user_fn):
        """Run ``server_fn(self.server)`` and ``user_fn(self.user)`` concurrently."""
        results: dict[int, object] = {}
        errors: dict[int, BaseException] = {}

        def target(role, fn, sess):
            try:
                results[role] = fn(sess)
            except BaseException as exc:  # propagated to the caller below
                errors[role] = exc
                sess.channel.close()

        t = threading.Thread(target=target, args=(USER, user_fn, self.user), daemon=True)
        t.start()
        target(SERVER, server_fn, self.server)
        t.join()
        if errors:
            raise errors.get(SERVER) or errors[USER]
        return results[SERVER], results[USER]


def op_count(session) -> OpCounter:
    return session.counter.snapshot()
