"""End-to-end classification pipelines: MPC baseline, Geo-I baseline and ContactGuard.

ContactGuard runs in three steps. The user perturbs its locations under
geo-indistinguishability and submits them; the server flags perturbed points
lying within the high-risk radius of a patient visit, randomizes the flags
and returns the selected indexes; the two parties then run the secure contact
predicate on the selected visits only.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import rng as streams
from .errors import ClassificationError
from .geo import PerturbedSet, perturb_location_set, randomized_response
from .model import ContactParams, Trajectory
from .secure.fixedpoint import quantize
from .secure.predicate import CountingSession, PrivateInputs, secure_contact_predicate
from .secure.session import LocalSession, OpCounter


class Method(str, Enum):
    MPC = "mpc"
    GEOI = "geoi"
    CG = "cg"


@dataclass(frozen=True)
class ServerState:
    """Union of all patient visits plus the run parameters. Read-only."""

    L_P: Trajectory
    params: ContactParams
    io: PrivateInputs = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "io", PrivateInputs.from_trajectory(self.L_P))

    def near_patient(self, points: np.ndarray, radius: float) -> np.ndarray:
        """Per point: is some patient location within ``radius``?"""
        if len(self.L_P) == 0 or len(points) == 0:
            return np.zeros(len(points), dtype=bool)
        diff = points[:, None, :] - self.L_P.xy[None, :, :]
        return (np.hypot(diff[..., 0], diff[..., 1]) <= radius).any(axis=1)


@dataclass(frozen=True)
class NoisyIndexSet:
    """1-based positions into the perturbed set, after randomized response."""

    indexes: tuple[int, ...]
    universe_size: int

    def __post_init__(self):
        idx = tuple(sorted(set(int(i) for i in self.indexes)))
        if idx and (idx[0] < 1 or idx[-1] > self.universe_size):
            raise ValueError(f"index outside [1, {self.universe_size}]")
        object.__setattr__(self, "indexes", idx)

    def __len__(self) -> int:
        return len(self.indexes)

    def __contains__(self, i) -> bool:
        return i in self.indexes

    def as_bits(self) -> np.ndarray:
        bits = np.zeros(self.universe_size, dtype=np.uint8)
        bits[np.asarray(self.indexes, dtype=np.int64) - 1] = 1
        return bits


@dataclass
class ClassificationResult:
    user_id: int
    predicted: bool
    secure_ops: OpCounter
    wall_nanos: int
    n_visits: int = 0
    n_selected: int = 0
    comm_nanos: int = 0  # time inside channel calls; only measured over sockets


def submitted_form(L_prime: PerturbedSet) -> PerturbedSet:
    """Round perturbed points to the fixed-point grid used on the wire.

    Applied in-process as well, so that socket and in-memory runs see the
    same coordinates.
    """
    return PerturbedSet(points=quantize(L_prime.points), source_len=L_prime.source_len,
                        per_loc_eps=L_prime.per_loc_eps)


def geoi_baseline_classify(L_prime: PerturbedSet, server: ServerState) -> bool:
    """Plaintext check of the perturbed points against the patient locations."""
    return bool(server.near_patient(L_prime.points, server.params.baseline_radius()).any())


def subset_selection(L_prime: PerturbedSet, server: ServerState,
                     rng: np.random.Generator) -> NoisyIndexSet:
    radius = server.params.high_risk_radius(L_prime.source_len)
    flags = server.near_patient(L_prime.points, radius).astype(np.uint8)
    noisy = randomized_response(flags, server.params.eps_patients, rng)
    return NoisyIndexSet(tuple(np.flatnonzero(noisy) + 1), L_prime.source_len)


def prepare_mpc_inputs(L_u: Trajectory, I: NoisyIndexSet) -> PrivateInputs:
    if I.universe_size != len(L_u):
        raise ValueError(f"index set over {I.universe_size} positions for "
                         f"a trajectory of {len(L_u)} visits")
    rows = np.asarray(I.indexes, dtype=np.int64) - 1
    if rows.size and (rows.min() < 0 or rows.max() >= len(L_u)):
        raise ValueError("index outside the trajectory")
    return PrivateInputs.from_trajectory(Trajectory(L_u.xy[rows], L_u.t[rows]))


def _run_predicate(user_io: PrivateInputs, server: ServerState, session):
    before = session.counter.snapshot()
    predicted = secure_contact_predicate(user_io, server.io, server.params, session)
    after = session.counter
    ops = OpCounter(after.secure_mults - before.secure_mults,
                    after.secure_cmps - before.secure_cmps,
                    after.oblivious_loads - before.oblivious_loads)
    return predicted, ops


def mpc_baseline_classify(L_u: Trajectory, server: ServerState,
                          session: LocalSession | CountingSession | None = None,
                          user_id: int = 0) -> ClassificationResult:
    """Secure predicate over the full trajectory on both sides; exact."""
    start = time.perf_counter_ns()
    session = LocalSession() if session is None else session
    predicted, ops = _run_predicate(PrivateInputs.from_trajectory(L_u), server, session)
    return ClassificationResult(user_id, predicted, ops, time.perf_counter_ns() - start,
                                n_visits=len(L_u), n_selected=len(L_u))


def contactguard_classify(L_u: Trajectory, server: ServerState, rng: np.random.Generator,
                          session: LocalSession | CountingSession | None = None, *,
                          server_rng: np.random.Generator | None = None,
                          user_id: int = 0) -> ClassificationResult:
    """Perturb, select a noisy high-risk subset, then run the predicate on it.

    ``rng`` drives the user's perturbation and ``server_rng`` (default: ``rng``)
    the server's randomized response.
    """
    start = time.perf_counter_ns()
    session = LocalSession() if session is None else session
    if len(L_u) == 0:
        return ClassificationResult(user_id, False, OpCounter(), time.perf_counter_ns() - start)
    L_prime = submitted_form(perturb_location_set(server.params.eps_user, L_u, rng))
    I = subset_selection(L_prime, server, rng if server_rng is None else server_rng)
    predicted, ops = _run_predicate(prepare_mpc_inputs(L_u, I), server, session)
    return ClassificationResult(user_id, predicted, ops, time.perf_counter_ns() - start,
                                n_visits=len(L_u), n_selected=len(I))


def geoi_classify(L_u: Trajectory, server: ServerState, rng: np.random.Generator,
                  user_id: int = 0) -> ClassificationResult:
    start = time.perf_counter_ns()
    predicted = False
    if len(L_u):
        L_prime = submitted_form(perturb_location_set(server.params.eps_user, L_u, rng))
        predicted = geoi_baseline_classify(L_prime, server)
    return ClassificationResult(user_id, predicted, OpCounter(), time.perf_counter_ns() - start,
                                n_visits=len(L_u))


def classify_user(L_u: Trajectory, server: ServerState, method: Method | str, seed: int,
                  user_id: int, backend: str = "sharing") -> ClassificationResult:
    """Classify one user with the streams derived from ``(seed, user_id)``."""
    method = Method(method)
    client_rng, server_rng, dealer_rng = streams.user_streams(seed, user_id)
    if method is Method.GEOI:
        return geoi_classify(L_u, server, client_rng, user_id)
    session = CountingSession() if backend == "counting" else LocalSession(dealer_rng)
    if method is Method.MPC:
        return mpc_baseline_classify(L_u, server, session, user_id)
    return contactguard_classify(L_u, server, client_rng, session,
                                 server_rng=server_rng, user_id=user_id)


def classify_population(users: Sequence[Trajectory], server: ServerState, method: Method | str,
                        seed: int = 0, *, backend: str = "sharing",
                        user_ids: Sequence[int] | None = None) -> list[ClassificationResult]:
    """Apply one method to every user independently.

    ``backend`` is ``"sharing"`` (secret-shared two-party run) or
    ``"counting"`` (plaintext decisions with exact operation counts).
    """
    if backend not in ("sharing", "counting"):
        raise ValueError(f"unknown backend {backend!r}")
    user_ids = range(len(users)) if user_ids is None else user_ids
    results = []
    for uid, L_u in zip(user_ids, users):
        try:
            results.append(classify_user(L_u, server, method, seed, uid, backend))
        except Exception as exc:
            raise ClassificationError(f"user {uid} ({Method(method).value}): {exc}") from exc
    return results


def total_ops(results: Sequence[ClassificationResult]) -> OpCounter:
    total = OpCounter()
    for r in results:
        total.add(r.secure_ops)
    return total
