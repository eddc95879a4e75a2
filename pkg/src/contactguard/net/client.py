"""User side of the protocol: perturbs locally and talks to a :class:`ContactServer`."""

from __future__ import annotations

import time

import numpy as np

from ..errors import HandshakeError, ProtocolError
from ..geo import perturb_location_set
from ..model import ContactParams, Trajectory
from ..protocols import (ClassificationResult, Method, NoisyIndexSet, prepare_mpc_inputs,
                         submitted_form)
from ..secure.predicate import PrivateInputs, evaluate_contact
from ..secure.session import OpCounter, SecureSession
from ..secure.sharing import USER, Pool
from . import wire
from .channel import DEFAULT_TIMEOUT, Channel, SocketChannel, TimedChannel
from .framing import MessageType


def _secure_phase(channel: Channel, own: PrivateInputs, params: ContactParams,
                  rng: np.random.Generator) -> tuple[bool, OpCounter]:
    channel.send(MessageType.SIZES, wire.encode_size(own.n))
    n_server = wire.decode_size(channel.expect(MessageType.SIZES))
    pool = Pool.from_bytes(wire.recv_pool(channel))
    session = SecureSession(USER, channel, rng, pool)
    predicted = evaluate_contact(session, own, n_server, params)
    return predicted, session.counter


def classify_over_channel(channel: Channel, L_u: Trajectory, method: Method | str,
                          params: ContactParams, rng: np.random.Generator,
                          user_id: int = 0) -> ClassificationResult:
    """Run the user half of one classification on an open channel.

    The handshake is completed before any location-derived data is sent.
    """
    method = Method(method)
    start = time.perf_counter_ns()
    hello = wire.Hello(wire.PROTOCOL_VERSION, method.value, user_id)
    channel.send(MessageType.HELLO, wire.encode_hello(method.value, user_id))
    try:
        wire.check_hello_reply(channel.expect(MessageType.HELLO), hello, params)
    except HandshakeError:
        channel.send(MessageType.ERROR, bytes([wire.ErrorCode.HANDSHAKE]))
        raise

    ops = OpCounter()
    n_selected = 0
    if method is Method.MPC:
        n_selected = len(L_u)
        predicted, ops = _secure_phase(channel, PrivateInputs.from_trajectory(L_u), params, rng)
    else:
        if len(L_u):
            points = submitted_form(perturb_location_set(params.eps_user, L_u, rng)).points
        else:
            points = np.zeros((0, 2))
        channel.send(MessageType.PERTURBED_SET, wire.encode_points(points))
        if method is Method.CG:
            indexes, universe = wire.decode_indexes(channel.expect(MessageType.NOISY_INDEXES))
            I = NoisyIndexSet(indexes, universe)
            if universe != len(L_u):
                raise ProtocolError(f"server indexed {universe} positions, sent {len(L_u)}")
            n_selected = len(I)
            predicted, ops = _secure_phase(channel, prepare_mpc_inputs(L_u, I), params, rng)
    verdict = wire.decode_result(channel.expect(MessageType.RESULT))
    if method is not Method.GEOI and verdict != predicted:
        raise ProtocolError("server reported a different result than the one opened")
    return ClassificationResult(user_id, verdict, ops.snapshot(), time.perf_counter_ns() - start,
                                n_visits=len(L_u), n_selected=n_selected)


def run_client(server_addr: tuple[str, int], L_u: Trajectory, method: Method | str,
               params: ContactParams, rng: np.random.Generator, *, user_id: int = 0,
               timeout: float | None = DEFAULT_TIMEOUT,
               latency: float = 0.0) -> ClassificationResult:
    """Connect, classify ``L_u`` and close the connection.

    ``comm_nanos`` of the result is the time spent in socket calls;
    ``latency`` adds a delay (seconds) before each frame the client sends.
    """
    channel = TimedChannel(SocketChannel.connect(server_addr, timeout), latency)
    try:
        result = classify_over_channel(channel, L_u, method, params, rng, user_id)
    finally:
        channel.close()
    result.comm_nanos = channel.nanos
    return result
