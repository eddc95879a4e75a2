"""Arithmetic and comparison on secret shares.

Every function here is run by both parties in lock-step with their own
shares; the two calls exchange messages through their sessions. Message
count and sizes depend only on the shapes of the arguments.

Comparison works by opening ``c = x + R`` for a dealer-supplied random ``R``
whose bits are secret-shared. Whether ``x <= k`` (unsigned, mod 2^64) then
reduces to two comparisons of the shared bits of ``R`` with public
constants, each of which is a suffix-product scan over the bit positions.
"""

from __future__ import annotations

import numpy as np

from .sharing import BITS, BeaverTriple
from .session import SecureSession

_ONE = np.uint64(1)
_MAX = np.uint64(2**64 - 1)
_SHIFTS = np.arange(BITS, dtype=np.uint64)
_SCAN_STEPS = tuple(1 << i for i in range(6))  # 1, 2, 4, ..., 32

# Beaver triples consumed by one threshold scan and by one comparison
SCAN_TRIPLES = sum(BITS - s for s in _SCAN_STEPS)  # 321
CMP_TRIPLES = 2 * SCAN_TRIPLES
BOUND = np.uint64(1 << 62)


def mul(session: SecureSession, x, y) -> np.ndarray:
    """Elementwise product of shared vectors using one batch of Beaver triples.

    Uncounted: callers account for multiplications at the level they mean.
    """
    x = np.asarray(x, dtype=np.uint64)
    y = np.asarray(y, dtype=np.uint64)
    shape = x.shape
    a, b, c = session.require_pool().take_triples(x.size)
    a, b, c = a.reshape(shape), b.reshape(shape), c.reshape(shape)
    opened = session.open(np.concatenate([(x - a).ravel(), (y - b).ravel()]))
    e, f = opened[:x.size].reshape(shape), opened[x.size:].reshape(shape)
    return c + e * b + f * a + session.public(e * f)


def beaver_mul(session: SecureSession, x, y, triple: BeaverTriple | None = None):
    """Secure product of shared ``x`` and ``y``; counts one multiplication per element.

    ``triple`` is only accepted for scalar operands; otherwise triples are
    drawn from the session pool.
    """
    if triple is not None:
        # one-element arrays: numpy scalars warn on the intended wraparound
        x, y, a, b, c = (np.array([v], dtype=np.uint64)
                         for v in (x, y, triple.a, triple.b, triple.c))
        e, f = np.split(session.open(np.concatenate([x - a, y - b])), 2)
        session.counter.secure_mults += 1
        return int((c + e * b + f * a + session.public(e * f))[0])
    z = mul(session, x, y)
    session.counter.secure_mults += int(np.size(z))
    return z


def _bit_less_than(session: SecureSession, r_bits: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Shares of ``[R < m]`` for shared bits of ``R`` (LSB first) and public ``m``.

    With ``Q_i`` the product of the equality bits ``[r_j == m_j]`` for ``j >= i``,
    ``[R < m] = sum over i with m_i = 1 of (Q_{i+1} - Q_i)``.
    """
    m_bits = ((m[:, None] >> _SHIFTS) & _ONE).astype(bool)
    one = session.public(_ONE)
    q = np.where(m_bits, r_bits, one - r_bits)
    for s in _SCAN_STEPS:
        q = q.copy()
        q[:, :BITS - s] = mul(session, q[:, :BITS - s], q[:, s:])
    q_next = np.concatenate([q[:, 1:], np.broadcast_to(one, (q.shape[0], 1))], axis=1)
    return np.where(m_bits, q_next - q, np.uint64(0)).sum(axis=1, dtype=np.uint64)


def leq_public(session: SecureSession, x, k) -> np.ndarray:
    """Shares of ``[x <= k]`` for shared ``x`` and public ``k``, both read as unsigned 64-bit."""
    x = np.asarray(x, dtype=np.uint64).ravel()
    k = np.broadcast_to(np.asarray(k, dtype=np.uint64), x.shape)
    n = x.size
    r_bits = session.require_pool().take_masks(n)
    r = (r_bits << _SHIFTS).sum(axis=1, dtype=np.uint64)
    c = session.open(x + r)
    # x <= k  <=>  [c < k] + [R < c + 1] - [R < c - k]   (all mod 2^64)
    lt = _bit_less_than(session, np.concatenate([r_bits, r_bits]),
                        np.concatenate([c + _ONE, c - k]))
    below_c1 = np.where(c == _MAX, session.public(_ONE), lt[:n])
    return session.public((c < k).astype(np.uint64)) + below_c1 - lt[n:]


def secure_less_equal(session: SecureSession, a, b) -> np.ndarray:
    """Shares of ``[a <= b]`` for shared operands known to lie in ``[0, 2^62)``."""
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    out = leq_public(session, a - b + session.public(BOUND), BOUND).reshape(a.shape)
    session.counter.secure_cmps += int(a.size)
    return out


def oblivious_or(session: SecureSession, bits: np.ndarray) -> np.ndarray:
    """OR-reduce shared bits with a balanced tree; ``len(bits) - 1`` multiplications."""
    v = np.asarray(bits, dtype=np.uint64).ravel()
    while v.size > 1:
        h = v.size // 2
        a, b = v[:h], v[h:2 * h]
        v = np.concatenate([a + b - beaver_mul(session, a, b), v[2 * h:]])
    return v
