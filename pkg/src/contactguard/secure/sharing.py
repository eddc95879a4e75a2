"""Additive secret sharing over Z_{2^64} and the trusted dealer.

All ring arithmetic is done on ``numpy.uint64`` arrays, whose overflow
semantics are exactly reduction mod 2^64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import ProtocolError
from .fixedpoint import RING, FixedCoord

SERVER = 1
USER = 2
BITS = 64


def random_ring(rng: np.random.Generator, shape) -> np.ndarray:
    n = int(np.prod(shape))
    return rng.bit_generator.random_raw(n).astype(np.uint64).reshape(shape)


@dataclass(frozen=True)
class Share:
    value: int
    party: int

    def __post_init__(self):
        if self.party not in (SERVER, USER):
            raise ValueError(f"party must be {SERVER} or {USER}")
        if not 0 <= self.value < RING:
            raise ValueError("share value outside the ring")


def share_secret(v: FixedCoord | int, rng: np.random.Generator) -> tuple[Share, Share]:
    raw = v.raw if isinstance(v, FixedCoord) else int(v) % RING
    s1 = int(random_ring(rng, 1)[0])
    return Share(s1, SERVER), Share((raw - s1) % RING, USER)


def reconstruct(a: Share, b: Share) -> int:
    if {a.party, b.party} != {SERVER, USER}:
        raise ValueError("need one share from each party")
    return (a.value + b.value) % RING


def share_array(values, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    values = np.asarray(values).astype(np.uint64)
    s1 = random_ring(rng, values.shape)
    return s1, values - s1


@dataclass(frozen=True)
class BeaverTriple:
    """One party's shares of ``(a, b, c)`` with ``c = a * b``."""

    a: int
    b: int
    c: int


class Pool:
    """Dealer material held by one party: multiplication triples and shared random bits.

    Each item is handed out once; asking for more than is left raises
    :class:`ProtocolError`.
    """

    _HEADER = struct.Struct("<QQ")

    def __init__(self, a, b, c, mask_bits):
        self.a, self.b, self.c = a, b, c
        self.mask_bits = mask_bits.reshape(-1, BITS)
        self._t = 0
        self._m = 0

    @property
    def triples_left(self) -> int:
        return self.a.shape[0] - self._t

    @property
    def masks_left(self) -> int:
        return self.mask_bits.shape[0] - self._m

    def take_triples(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if n > self.triples_left:
            raise ProtocolError(f"triple pool exhausted: need {n}, have {self.triples_left}")
        s = slice(self._t, self._t + n)
        self._t += n
        return self.a[s], self.b[s], self.c[s]

    def take_triple(self) -> BeaverTriple:
        a, b, c = self.take_triples(1)
        return BeaverTriple(int(a[0]), int(b[0]), int(c[0]))

    def take_masks(self, n: int) -> np.ndarray:
        """``(n, 64)`` shares of random bits, least significant bit first."""
        if n > self.masks_left:
            raise ProtocolError(f"bit pool exhausted: need {n}, have {self.masks_left}")
        out = self.mask_bits[self._m:self._m + n]
        self._m += n
        return out

    def to_bytes(self) -> bytes:
        """Serialize the unused part of the pool."""
        t, m = self._t, self._m
        parts = [self._HEADER.pack(self.triples_left, self.masks_left)]
        for arr in (self.a[t:], self.b[t:], self.c[t:], self.mask_bits[m:]):
            parts.append(arr.astype("<u8").tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Pool":
        if len(data) < cls._HEADER.size:
            raise ProtocolError("truncated dealer pool")
        nt, nm = cls._HEADER.unpack_from(data)
        expected = cls._HEADER.size + 8 * (3 * nt + BITS * nm)
        if len(data) != expected:
            raise ProtocolError(f"dealer pool of {len(data)} bytes, expected {expected}")
        body = np.frombuffer(data, dtype="<u8", offset=cls._HEADER.size).astype(np.uint64)
        a, b, c = body[:nt], body[nt:2 * nt], body[2 * nt:3 * nt]
        return cls(a, b, c, body[3 * nt:])


class Dealer:
    """Trusted third party generating correlated randomness.

    It only ever learns how much material a session needs, which is a function
    of the public input sizes.
    """

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def provision(self, n_triples: int, n_masks: int) -> tuple[Pool, Pool]:
        rng = self.rng
        a = random_ring(rng, n_triples)
        b = random_ring(rng, n_triples)
        c = a * b
        bits = rng.integers(0, 2, size=(n_masks, BITS), dtype=np.uint64)
        a1, a2 = share_array(a, rng)
        b1, b2 = share_array(b, rng)
        c1, c2 = share_array(c, rng)
        m1, m2 = share_array(bits, rng)
        return Pool(a1, b1, c1, m1), Pool(a2, b2, c2, m2)

