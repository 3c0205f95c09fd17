"""Pheromone on two competing paths.

Six static nodes form two branches from S to the server D: a 2-hop branch
through A and a 4-hop branch through B1-B2-B3.  Each cycle evaporates, sends
one request down each branch, and lets the replies retrace them.  Replies
deposit q / hops, so the short branch collects twice as much per cycle.
"""

# %%
from dtn_parking import AcoParams, make_message, MessageKind, Current
from dtn_parking.aco import RouterState, evaporate_all, on_reply
from dtn_parking.core import IdAllocator

S, A, D, B1, B2, B3 = range(6)
params = AcoParams(rho=0.1, q=1.0)
states = {n: RouterState.for_node(n, params) for n in range(6)}
ids = IdAllocator()


def one_cycle(now):
    for st in states.values():
        evaporate_all(st.pheromone, params)
    for branch in ((S, A, D), (S, B1, B2, B3, D)):
        req = make_message(MessageKind.PARKING_REQUEST, S, 0, Current(), now, 10**9, 8, ids=ids)
        for nxt in branch[1:]:
            req = req.extended(nxt)
        reply = make_message(MessageKind.PARKING_REPLY, D, 0, Current(), now, 10**9, 8,
                             ids=ids, dest_node=S, route=req.path)
        for node in reversed(branch[:-1]):
            reply = reply.extended(node)
            on_reply(states[node], reply, now, group=0, params=params,
                     neighbors_in_contact=[branch[max(branch.index(node) - 1, 0)]])


# %%
for k in range(1, 31):
    one_cycle(k * params.evap_interval)
    if k in (1, 2, 5, 10, 30):
        t = states[S].pheromone
        print(f"cycle {k:>2}: toward A {t.level(0, A):.4f}   toward B1 {t.level(0, B1):.4f}")

# %%
# Both levels approach d / rho: 5.0 for the short branch, 2.5 for the long one.
from dtn_parking import forward_probabilities
print(forward_probabilities(states[S].pheromone, params, 0, [(A, 1.0), (B1, 1.0)]))
