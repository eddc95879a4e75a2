"""The two-party contact predicate on secret shares, and its counting twin.

Party 1 (server) contributes the patient visits, party 2 (user) its own.
All ``n1 * n2`` visit pairs are evaluated; per-pair results are OR-combined
on shares and only the final bit is opened, so nothing about which pair
matched (or whether one matched early) is visible in the transcript.

Per pair the circuit spends two squarings, two comparisons (distance and
time) and one AND; the OR tree adds ``n1 * n2 - 1`` multiplications.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ProtocolError
from ..model import ContactParams, TemporalMode, Trajectory
from .compare import CMP_TRIPLES, SCAN_TRIPLES, _SCAN_STEPS, leq_public, mul, oblivious_or
from .fixedpoint import SCALE, encode_array
from .session import LocalSession, OpCounter, SecureSession
from .sharing import BITS, SERVER, random_ring


@dataclass(frozen=True)
class PrivateInputs:
    """One party's visits as ring-ready columns: fixed-point x, y and integer seconds."""

    x: np.ndarray
    y: np.ndarray
    time: np.ndarray

    def __post_init__(self):
        if not (self.x.shape == self.y.shape == self.time.shape) or self.x.ndim != 1:
            raise ValueError("x, y and time must be 1-D arrays of equal length")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def __len__(self) -> int:
        return self.n

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "PrivateInputs":
        return cls(encode_array(traj.xy[:, 0]), encode_array(traj.xy[:, 1]),
                   traj.t.astype(np.int64))

    @classmethod
    def empty(cls) -> "PrivateInputs":
        z = np.zeros(0, dtype=np.uint64)
        return cls(z, z, np.zeros(0, dtype=np.int64))

    def columns(self) -> np.ndarray:
        return np.concatenate([self.x, self.y, self.time.view(np.uint64)]).astype(np.uint64)


def pool_requirements(n1: int, n2: int) -> tuple[int, int]:
    """(Beaver triples, shared random masks) one predicate over ``n1 x n2`` pairs consumes."""
    n = n1 * n2
    if n == 0:
        return 0, 0
    return 4 * n - 1 + 2 * n * CMP_TRIPLES, 2 * n


def _thresholds(params: ContactParams) -> tuple[int, int]:
    r_raw = int(round(params.r * SCALE))
    return r_raw * r_raw, int(np.floor(params.delta))


def expected_counts(n1: int, n2: int) -> OpCounter:
    n = n1 * n2
    if n == 0:
        return OpCounter()
    return OpCounter(secure_mults=3 * n + (n - 1), secure_cmps=2 * n,
                     oblivious_loads=3 * (n1 + n2))


def opening_schedule(n1: int, n2: int) -> list[int]:
    """Element counts of every symmetric opening in one predicate, in order.

    Excludes the initial input exchange, where the server sends ``3 * n1`` and
    the user ``3 * n2`` elements.
    """
    n = n1 * n2
    if n == 0:
        return []
    sched = [2 * 2 * n, 2 * n]  # squarings; masked comparison inputs
    sched += [2 * 2 * (2 * n) * (BITS - s) for s in _SCAN_STEPS]
    sched.append(2 * n)  # AND of distance and time bits
    m = n
    while m > 1:
        sched.append(2 * (m // 2))
        m -= m // 2
    sched.append(1)
    return sched


def evaluate_contact(session: SecureSession, own: PrivateInputs, n_peer: int,
                     params: ContactParams) -> bool:
    """This party's half of the predicate; the session must already hold dealer material."""
    if session.role == SERVER:
        n1, n2 = own.n, n_peer
    else:
        n1, n2 = n_peer, own.n
    n = n1 * n2
    if n == 0:
        return False

    # input sharing: keep a random share, send the masked remainder
    mine = random_ring(session.rng, 3 * own.n)
    theirs = session.exchange(own.columns() - mine, expect=3 * n_peer)
    shares = {session.role: mine, 3 - session.role: theirs}
    session.counter.oblivious_loads += 3 * (n1 + n2)
    x1, y1, t1 = shares[1].reshape(3, n1)
    x2, y2, t2 = shares[2].reshape(3, n2)

    # pair (i, j) -> row i of the server, column j of the user
    dx = (x1[:, None] - x2[None, :]).ravel()
    dy = (y1[:, None] - y2[None, :]).ravel()
    lag = (t2[None, :] - t1[:, None]).ravel()

    sq = mul(session, np.concatenate([dx, dy]), np.concatenate([dx, dy]))
    session.counter.secure_mults += 2 * n
    d_sq = sq[:n] + sq[n:]

    r_sq, delta = _thresholds(params)
    if params.temporal_mode is TemporalMode.ABSOLUTE:
        lag = lag + session.public(np.uint64(delta))
        delta_bound = 2 * delta
    else:
        delta_bound = delta
    k = np.concatenate([np.full(n, r_sq, dtype=np.uint64),
                        np.full(n, delta_bound, dtype=np.uint64)])
    ok = leq_public(session, np.concatenate([d_sq, lag]), k)
    session.counter.secure_cmps += 2 * n

    both = mul(session, ok[:n], ok[n:])
    session.counter.secure_mults += n
    any_pair = oblivious_or(session, both)
    return bool(session.open(any_pair)[0] & np.uint64(1))


def plain_contact_fixed(server_io: PrivateInputs, user_io: PrivateInputs,
                        params: ContactParams) -> bool:
    """Plaintext evaluation with exactly the predicate's fixed-point semantics."""
    if server_io.n == 0 or user_io.n == 0:
        return False
    r_sq, delta = _thresholds(params)
    sx, sy = server_io.x.view(np.int64), server_io.y.view(np.int64)
    ux, uy = user_io.x.view(np.int64), user_io.y.view(np.int64)
    dx = sx[:, None] - ux[None, :]
    dy = sy[:, None] - uy[None, :]
    close = dx * dx + dy * dy <= r_sq
    lag = user_io.time[None, :] - server_io.time[:, None]
    if params.temporal_mode is TemporalMode.ABSOLUTE:
        recent = np.abs(lag) <= delta
    else:
        recent = (lag >= 0) & (lag <= delta)
    return bool(np.any(close & recent))


@dataclass
class CountingSession:
    """Plaintext backend: same decisions and counters, no cryptography.

    ``schedule`` accumulates the element counts of the openings the sharing
    backend would have performed.
    """

    counter: OpCounter = field(default_factory=OpCounter)
    schedule: list[int] = field(default_factory=list)
    record_schedule: bool = False


def secure_contact_predicate(user_io: PrivateInputs, server_io: PrivateInputs,
                             params: ContactParams,
                             session: LocalSession | CountingSession | None = None) -> bool:
    """Evaluate the contact predicate between one user and the server.

    With a :class:`LocalSession` both parties run on shares in two threads;
    with a :class:`CountingSession` the result and the operation counts are
    produced in plaintext. The result is learned by both parties.
    """
    if session is None:
        session = LocalSession()
    n1, n2 = server_io.n, user_io.n
    if isinstance(session, CountingSession):
        session.counter.add(expected_counts(n1, n2))
        if session.record_schedule:
            session.schedule.extend(opening_schedule(n1, n2))
        return plain_contact_fixed(server_io, user_io, params)

    if n1 * n2 == 0:
        return False
    session.provision(*pool_requirements(n1, n2))
    r_server, r_user = session.run(
        lambda s: evaluate_contact(s, server_io, n2, params),
        lambda s: evaluate_contact(s, user_io, n1, params),
    )
    if r_server != r_user:
        raise ProtocolError("parties opened different results")
    return r_server


__all__ = [
    "PrivateInputs", "pool_requirements", "expected_counts", "opening_schedule",
    "evaluate_contact", "plain_contact_fixed", "CountingSession",
    "secure_contact_predicate", "SCAN_TRIPLES",
]
