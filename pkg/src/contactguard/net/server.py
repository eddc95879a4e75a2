"""Health-authority side of the protocol over TCP.

Per connection: HELLO, then the method-specific exchange, then RESULT.

* ``geoi``: PERTURBED_SET in, RESULT out.
* ``mpc``: SIZES both ways, DEALER_POOL out, MASKED_OPENING stream, RESULT out.
* ``cg``: PERTURBED_SET in, NOISY_INDEXES out, then as ``mpc`` on the subset.

The dealer is co-located with the server but only sees the public sizes.
"""

from __future__ import annotations

import logging
import socketserver
import threading
import time
from dataclasses import dataclass, field

from .. import rng as streams
from ..errors import HandshakeError, ProtocolError, TransportError
from ..geo import PerturbedSet
from ..protocols import (ClassificationResult, Method, ServerState, geoi_baseline_classify,
                         subset_selection)
from ..secure.predicate import evaluate_contact, pool_requirements
from ..secure.session import OpCounter, SecureSession
from ..secure.sharing import SERVER, Dealer
from . import wire
from .channel import Channel, SocketChannel
from .framing import MessageType

log = logging.getLogger(__name__)


def _secure_phase(channel: Channel, state: ServerState, n_user: int, dealer_rng,
                  session_rng) -> tuple[bool, OpCounter]:
    """Reply with our size, ship the user's dealer share, then run the predicate."""
    n1 = state.io.n
    channel.send(MessageType.SIZES, wire.encode_size(n1))
    own, theirs = Dealer(dealer_rng).provision(*pool_requirements(n1, n_user))
    wire.send_pool(channel, theirs.to_bytes())
    session = SecureSession(SERVER, channel, session_rng, own)
    predicted = evaluate_contact(session, state.io, n_user, state.params)
    return predicted, session.counter


def serve_connection(channel: Channel, state: ServerState, method: Method | str,
                     seed: int = 0) -> ClassificationResult:
    """Run the server half of one classification on an open channel.

    A protocol violation by the client is answered with an ERROR frame and re-raised.
    """
    try:
        return _serve(channel, state, Method(method), seed)
    except HandshakeError:
        raise
    except (ProtocolError, ValueError):
        try:
            channel.send(MessageType.ERROR, bytes([wire.ErrorCode.PROTOCOL]))
        except TransportError:
            pass
        raise


def _serve(channel: Channel, state: ServerState, method: Method,
           seed: int) -> ClassificationResult:
    start = time.perf_counter_ns()
    hello = wire.decode_hello(channel.expect(MessageType.HELLO))
    if hello.version != wire.PROTOCOL_VERSION or hello.method != method.value:
        channel.send(MessageType.ERROR, bytes([wire.ErrorCode.HANDSHAKE]))
        raise HandshakeError(f"client wants version {hello.version} method {hello.method}; "
                             f"serving version {wire.PROTOCOL_VERSION} method {method.value}")
    channel.send(MessageType.HELLO, wire.encode_hello_reply(hello, state.params))
    _, server_rng, dealer_rng = streams.user_streams(seed, hello.user_id)

    ops = OpCounter()
    n_visits = n_selected = 0
    if method is Method.MPC:
        n_visits = n_selected = wire.decode_size(channel.expect(MessageType.SIZES))
        predicted, ops = _secure_phase(channel, state, n_visits, dealer_rng, server_rng)
    else:
        points = wire.decode_points(channel.expect(MessageType.PERTURBED_SET))
        n_visits = len(points)
        L_prime = PerturbedSet(points=points, source_len=n_visits,
                               per_loc_eps=state.params.eps_user / max(n_visits, 1))
        if method is Method.GEOI:
            predicted = geoi_baseline_classify(L_prime, state)
        else:
            I = subset_selection(L_prime, state, server_rng)
            channel.send(MessageType.NOISY_INDEXES, wire.encode_indexes(I.indexes, n_visits))
            n_selected = len(I)
            announced = wire.decode_size(channel.expect(MessageType.SIZES))
            if announced != n_selected:
                raise ProtocolError(f"client announced {announced} inputs, "
                                    f"expected {n_selected}")
            predicted, ops = _secure_phase(channel, state, n_selected, dealer_rng, server_rng)
    channel.send(MessageType.RESULT, wire.encode_result(predicted))
    return ClassificationResult(hello.user_id, predicted, ops.snapshot(),
                                time.perf_counter_ns() - start, n_visits=n_visits,
                                n_selected=n_selected)


@dataclass
class ServerReport:
    results: list[ClassificationResult] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)


class ContactServer:
    """Threaded TCP server; one handler thread per client connection."""

    def __init__(self, bind_addr: tuple[str, int], state: ServerState, method: Method | str,
                 seed: int = 0, timeout: float | None = 60.0):
        self.state = state
        self.method = Method(method)
        self.seed = seed
        self.report = ServerReport()
        self._lock = threading.Lock()
        self._done = threading.Condition(self._lock)
        self._finished = 0
        outer = self

        class Handler(socketserver.BaseRequestHandler):
            def handle(self):
                outer._handle(SocketChannel(self.request, timeout))

        socketserver.ThreadingTCPServer.allow_reuse_address = True
        self._tcp = socketserver.ThreadingTCPServer(bind_addr, Handler)
        self._tcp.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._tcp.server_address[:2]

    def _handle(self, channel: SocketChannel) -> None:
        try:
            result = serve_connection(channel, self.state, self.method, self.seed)
            log.info("user %d: contact=%s cmps=%d", result.user_id, result.predicted,
                     result.secure_ops.secure_cmps)
            with self._lock:
                self.report.results.append(result)
        except (ProtocolError, TransportError, ValueError) as exc:
            log.warning("session failed: %s", exc)
            with self._lock:
                self.report.errors.append(str(exc))
        finally:
            channel.close()
            with self._done:
                self._finished += 1
                self._done.notify_all()

    def start(self) -> "ContactServer":
        self._thread = threading.Thread(target=self._tcp.serve_forever, daemon=True)
        self._thread.start()
        return self

    def wait(self, n_sessions: int, timeout: float | None = None) -> bool:
        with self._done:
            return self._done.wait_for(lambda: self._finished >= n_sessions, timeout)

    def shutdown(self) -> None:
        self._tcp.shutdown()
        self._tcp.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.shutdown()


def run_server(bind_addr: tuple[str, int], state: ServerState, method: Method | str,
               seed: int = 0, max_sessions: int | None = None) -> ServerReport:
    """Serve until ``max_sessions`` connections have finished (forever if ``None``)."""
    server = ContactServer(bind_addr, state, method, seed).start()
    try:
        if max_sessions is None:
            server._thread.join()
        else:
            server.wait(max_sessions)
    finally:
        server.shutdown()
    return server.report
