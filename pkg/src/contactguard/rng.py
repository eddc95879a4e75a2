"""Seeded, splittable random streams.

Every stochastic routine takes an explicit ``numpy.random.Generator``. Streams
for a sub-task are derived from the run seed plus a key path, so that the
stream a user gets does not depend on the order users are processed in.
"""

from __future__ import annotations

import numpy as np

# stable integer tags for the per-user sub-streams
CLIENT = 1
SERVER = 2
DEALER = 3
DATA = 4


def stream(seed: int, *path: int) -> np.random.Generator:
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.default_rng(np.random.SeedSequence([seed, *path]))


def user_streams(seed: int, user_id: int) -> tuple[np.random.Generator, np.random.Generator,
                                                   np.random.Generator]:
    """(client, server, dealer) streams for one user's classification."""
    return (stream(seed, CLIENT, user_id), stream(seed, SERVER, user_id),
            stream(seed, DEALER, user_id))
