"""One server, a handful of clients, real sockets.

Run with ``python3 demos/tcp_session.py``. The health authority listens on a
loopback port; each user connects, perturbs its visits locally, receives the
noisy high-risk index set and runs the secure predicate on it. The printed
per-user lines match what an in-process run with the same seed produces.
"""

from contactguard import ContactParams, ServerState
from contactguard.data import GenConfig, gen_synthetic
from contactguard.net.client import run_client
from contactguard.net.server import ContactServer
from contactguard.rng import user_streams

SEED = 5
params = ContactParams()
ds = gen_synthetic(GenConfig(n_users=8, contact_plant_rate=0.5, seed=SEED), params)
state = ServerState(ds.patients_union, params)

with ContactServer(("127.0.0.1", 0), state, "cg", seed=SEED) as server:
    print(f"serving {len(ds.patients_union)} patient visits on {server.address}")
    for uid, L_u, truth in zip(ds.user_ids, ds.users, ds.ground_truth):
        client_rng = user_streams(SEED, uid)[0]
        res = run_client(server.address, L_u, "cg", params, client_rng, user_id=uid)
        print(f"user {uid}: contact={res.predicted!s:5} truth={bool(truth)!s:5} "
              f"selected {res.n_selected}/{len(L_u)} visits, "
              f"{res.secure_ops.secure_cmps} comparisons, "
              f"{res.comm_nanos / 1e6:.1f} ms on the wire")
    server.wait(len(ds))
    print(f"server saw {len(server.report.results)} sessions, "
          f"{len(server.report.errors)} errors")
