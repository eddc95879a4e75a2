import numpy as np
import pytest

from contactguard.model import ContactParams, Trajectory
from contactguard.secure.session import LocalSession
from contactguard.secure.sharing import share_array

HOUR = 3600


@pytest.fixture
def params():
    return ContactParams()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def traj(*visits):
    """``traj((x, y, t), ...)`` -> Trajectory."""
    if not visits:
        return Trajectory()
    xy = [(x, y) for x, y, _ in visits]
    return Trajectory(np.array(xy, dtype=float), [t for _, _, t in visits])


def run_shared(fn, *secrets, n_triples=0, n_masks=0, seed=0):
    """Share each secret vector, run ``fn(session, *shares)`` on both parties, reconstruct."""
    rng = np.random.default_rng(seed)
    sess = LocalSession(rng)
    sess.provision(n_triples, n_masks)
    pairs = [share_array(np.asarray(s, dtype=np.uint64), rng) for s in secrets]
    out1, out2 = sess.run(lambda s: fn(s, *[p[0] for p in pairs]),
                          lambda s: fn(s, *[p[1] for p in pairs]))
    return np.asarray(out1, dtype=np.uint64) + np.asarray(out2, dtype=np.uint64), sess


def random_instance(rng, params, max_visits=6, margin=2**-6):
    """Small user/patient trajectories clustered so roughly half the instances are contacts.

    Every cross pair keeps its distance at least ``margin`` away from ``params.r``,
    and coordinates sit on the fixed-point grid, so the oracle has no boundary ties.
    """
    while True:
        n1, n2 = rng.integers(1, max_visits + 1, size=2)
        span = 3 * params.r
        P = np.round(rng.uniform(0, span, (n1, 2)) * 128) / 128
        U = np.round(rng.uniform(0, span, (n2, 2)) * 128) / 128
        d = np.hypot(*(U[:, None, :] - P[None, :, :]).transpose(2, 0, 1))
        if np.all(np.abs(d - params.r) >= margin):
            break
    t0 = 1_623_283_200
    tp = t0 + rng.integers(0, 2 * params.delta, n1)
    tu = t0 + rng.integers(0, 2 * params.delta, n2)
    return Trajectory(U, tu), Trajectory(P, tp)
