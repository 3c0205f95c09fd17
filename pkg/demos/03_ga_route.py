"""A genetic search over time-respecting walks, checked by enumeration.

Chromosomes are bit strings; each 8-bit gene picks, modulo the number of
usable contacts, where to go next.  On a plan this small every walk can be
listed, so the GA's answer can be compared with the true optimum.
"""

# %%
from dtn_parking import Contact, ContactPlan, GaParams, ga_route, Rng, Current
from dtn_parking.baselines import delay_fitness
from dtn_parking.membership import history_from_events, join

plan = ContactPlan([
    Contact(0, 1, 0, 4_000), Contact(1, 4, 9_000, 12_000),
    Contact(0, 2, 1_000, 3_000), Contact(2, 3, 2_000, 5_000), Contact(3, 4, 6_000, 7_000),
    Contact(0, 3, 8_000, 9_000),
])
members = history_from_events([join(4, 0, 0)])  # node 4 is the only group member

# %%
def walks(node, t, seen):
    """Every (node, arrival) sequence the decoder could produce."""
    yield [(node, t)]
    for nxt_t, peer in plan.feasible(node, t, exclude=seen):
        for rest in walks(peer, nxt_t, seen | {peer}):
            yield [(node, t)] + rest


best = min(w[-1][1] for w in walks(0, 0, {0}) if w[-1][0] == 4)
print("optimal delivery delay:", best, "ms -> fitness", delay_fitness(best))

# %%
for seed in range(3):
    res = ga_route(plan, 0, 0, 0, members, Current(), 60_000, GaParams(), Rng(seed))
    print(f"seed {seed}: fitness {res.fitness:.2f}, path {res.path[: res.delivery_index + 1]}")
