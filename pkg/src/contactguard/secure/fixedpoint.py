"""Fixed-point encoding of coordinates into the 64-bit ring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SCALE_BITS = 7
SCALE = 1 << SCALE_BITS
MAX_ABS = float(1 << 20)
RING = 1 << 64
MASK64 = RING - 1


@dataclass(frozen=True)
class FixedCoord:
    """Ring element holding ``round(value * 2**SCALE_BITS)`` in two's complement."""

    raw: int

    def __post_init__(self):
        if not 0 <= self.raw < RING:
            raise ValueError(f"raw value {self.raw} outside the 64-bit ring")

    @property
    def value(self) -> float:
        return decode_fixed(self)


def encode_fixed(v: float) -> FixedCoord:
    v = float(v)
    if not abs(v) <= MAX_ABS:
        raise ValueError(f"{v} outside the encodable range +-2^20")
    return FixedCoord(int(round(v * SCALE)) & MASK64)


def decode_fixed(c: FixedCoord) -> float:
    raw = c.raw - RING if c.raw >= RING // 2 else c.raw
    return raw / SCALE


def encode_array(values) -> np.ndarray:
    """Vectorised :func:`encode_fixed`; returns a ``uint64`` array of raw values."""
    values = np.asarray(values, dtype=np.float64)
    if values.size and not np.all(np.abs(values) <= MAX_ABS):
        raise ValueError("coordinates outside the encodable range +-2^20")
    return np.rint(values * SCALE).astype(np.int64).view(np.uint64)


def decode_array(raw) -> np.ndarray:
    return np.asarray(raw, dtype=np.uint64).view(np.int64) / SCALE


def quantize(values) -> np.ndarray:
    """Round real coordinates to the nearest encodable value."""
    return decode_array(encode_array(values))
