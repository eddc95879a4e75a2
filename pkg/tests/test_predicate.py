import numpy as np
import pytest

from contactguard.errors import ProtocolError
from contactguard.model import ContactParams, Trajectory, is_contact_exact
from contactguard.net.framing import MessageType
from contactguard.secure.predicate import (CountingSession, PrivateInputs, expected_counts,
                                           opening_schedule, plain_contact_fixed,
                                           pool_requirements, secure_contact_predicate)
from contactguard.secure.session import LocalSession, op_count

from conftest import HOUR, random_instance, traj


def io(tr):
    return PrivateInputs.from_trajectory(tr)


def test_private_inputs_validate():
    with pytest.raises(ValueError):
        PrivateInputs(np.zeros(2, np.uint64), np.zeros(1, np.uint64), np.zeros(2, np.int64))
    assert PrivateInputs.empty().n == 0


@pytest.mark.parametrize("n1,n2,cmps,mults", [(1, 1, 2, 3), (2, 3, 12, 23)])
def test_counting_contract(n1, n2, cmps, mults):
    rng = np.random.default_rng(n1 * 10 + n2)
    P = Trajectory(rng.uniform(0, 50, (n1, 2)), rng.integers(0, 10**6, n1))
    U = Trajectory(rng.uniform(0, 50, (n2, 2)), rng.integers(0, 10**6, n2))
    sess = LocalSession(rng)
    secure_contact_predicate(io(U), io(P), ContactParams(), sess)
    c = op_count(sess)
    assert (c.secure_cmps, c.secure_mults) == (cmps, mults)
    assert c.oblivious_loads == 3 * (n1 + n2)
    assert c == expected_counts(n1, n2)
    # dealer material is consumed exactly
    assert sess.server.pool.triples_left == 0 and sess.server.pool.masks_left == 0
    assert pool_requirements(n1, n2)[1] == 2 * n1 * n2


def test_empty_input():
    sess = LocalSession()
    assert not secure_contact_predicate(PrivateInputs.empty(), io(traj((0, 0, 0))),
                                        ContactParams(), sess)
    assert op_count(sess) == expected_counts(0, 5)
    assert expected_counts(0, 5).secure_mults == 0 and opening_schedule(3, 0) == []


def test_identical_visit_is_contact():
    v = traj((1234.5, 678.25, 1_700_000_000))
    assert secure_contact_predicate(io(v), io(v), ContactParams(r=0.5, delta=1))


def test_example_one_on_shares():
    t5 = 1623319200
    L_P = traj((100.0, 100.0, t5), (400.0, 300.0, t5 + 3 * HOUR))
    u1 = traj((102.0, 101.0, t5 + HOUR), (250.0, 50.0, t5 + 5 * HOUR))
    u2 = traj((700.0, 700.0, t5 + HOUR), (20.0, 600.0, t5 + 2 * HOUR))
    p = ContactParams(r=5.0, delta=2 * HOUR)
    assert secure_contact_predicate(io(u1), io(L_P), p)
    assert not secure_contact_predicate(io(u2), io(L_P), p)


@pytest.mark.parametrize("mode", ["patient-earlier", "absolute"])
def test_random_instances_match_oracle_and_counting(mode):
    rng = np.random.default_rng(2 if mode == "absolute" else 1)
    p = ContactParams(r=5.0, delta=7200, temporal_mode=mode)
    hits = 0
    for _ in range(40):
        U, P = random_instance(rng, p)
        truth = is_contact_exact(U, P, p)
        sess, counting = LocalSession(rng), CountingSession()
        assert secure_contact_predicate(io(U), io(P), p, sess) == truth
        assert secure_contact_predicate(io(U), io(P), p, counting) == truth
        assert plain_contact_fixed(io(P), io(U), p) == truth
        assert counting.counter == sess.counter
        hits += truth
    assert 5 < hits < 35


def test_transcript_matches_analytic_schedule():
    n1, n2 = 3, 2
    rng = np.random.default_rng(3)
    P = Trajectory(rng.uniform(0, 10, (n1, 2)), rng.integers(0, 10**5, n1))
    U = Trajectory(rng.uniform(0, 10, (n2, 2)), rng.integers(0, 10**5, n2))
    sess = LocalSession(rng, record=True)
    secure_contact_predicate(io(U), io(P), ContactParams(), sess)
    sent = [n for d, _, n in sess.server.channel.shape(MessageType.MASKED_OPENING)
            if d == "send"]
    # the first send is the server's input sharing, then one frame per opening
    assert [(n - 1) // 8 for n in sent] == [3 * n1] + opening_schedule(n1, n2)
    counting = CountingSession(record_schedule=True)
    secure_contact_predicate(io(U), io(P), ContactParams(), counting)
    assert counting.schedule == opening_schedule(n1, n2)


def test_undersized_pool_is_protocol_error():
    class Starved(LocalSession):
        def provision(self, n_triples, n_masks):
            super().provision(n_triples - 1, n_masks)

    v = traj((0, 0, 0), (1, 1, 1))
    with pytest.raises(ProtocolError):
        secure_contact_predicate(io(v), io(v), ContactParams(), Starved(timeout=5))
