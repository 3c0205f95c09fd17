"""Shared hypothesis strategies and oracles for the test suite."""

import numpy as np
from hypothesis import strategies as st

from dtn_parking.membership import MembershipEvent, MembershipKind


def legal_history(rng, max_events=10, horizon=10_000, nodes=3, groups=2):
    """Random legal join/leave sequence as a time-ordered list of events."""
    n = int(rng.integers(0, max_events + 1))
    times = np.sort(rng.integers(0, horizon, size=n))
    open_ = set()
    out = []
    for t in times:
        node, group = int(rng.integers(nodes)), int(rng.integers(groups))
        kind = MembershipKind.LEAVE if (node, group) in open_ else MembershipKind.JOIN
        (open_.discard if kind is MembershipKind.LEAVE else open_.add)((node, group))
        out.append(MembershipEvent(int(t), node, group, kind))
    return out


def bitmap(events, node, group, horizon):
    """Per-millisecond membership of (node, group) over [0, horizon) by direct replay."""
    delta = np.zeros(horizon + 1, dtype=np.int64)
    for e in events:
        if (e.node, e.group) == (node, group):
            delta[e.at] += 1 if e.kind is MembershipKind.JOIN else -1
    return np.cumsum(delta)[:horizon] > 0


def bitmaps(events, pairs, horizon):
    """Per-millisecond membership of every (node, group) in ``pairs``, one row each."""
    row = {pair: i for i, pair in enumerate(pairs)}
    delta = np.zeros((len(pairs), horizon + 1), dtype=np.int8)
    for e in events:
        i = row.get((e.node, e.group))
        if i is not None:
            delta[i, e.at] += 1 if e.kind is MembershipKind.JOIN else -1
    return np.cumsum(delta, axis=1, dtype=np.int8)[:, :horizon] > 0


@st.composite
def histories(draw, max_events=10, horizon=200, nodes=2, groups=2):
    seed = draw(st.integers(0, 2**32 - 1))
    return legal_history(np.random.default_rng(seed), max_events, horizon, nodes, groups)


# --- double-bridge driver -------------------------------------------------------

def double_bridge_cycles(cycles, params):
    """Run request/reply cycles over both branches of the two-path topology.

    Nodes: S=0, A=1, D=2 (server, group 0), B1=3, B2=4, B3=5.  Each cycle
    evaporates every table, then sends one request along S-A-D and one along
    S-B1-B2-B3-D, each answered by a reply retracing its path.  Returns the
    levels at S toward A and toward B1 after every cycle.
    """
    from dtn_parking.aco import Decision, RouterState, evaporate_all, on_contact_request, on_reply
    from dtn_parking.core import Current, IdAllocator, MessageKind, make_message

    S, A, D, B1, B2, B3 = range(6)
    group = 0
    states = {n: RouterState.for_node(n, params) for n in range(6)}
    ids = IdAllocator()
    short, long_ = (S, A, D), (S, B1, B2, B3, D)
    toward_a, toward_b = [], []
    for k in range(cycles):
        now = k * params.evap_interval
        for st in states.values():
            evaporate_all(st.pheromone, params)
        for branch in (short, long_):
            req = make_message(MessageKind.PARKING_REQUEST, S, group, Current(), now, 10**9,
                               params.hop_limit, ids=ids)
            states[S].store(req, now)
            for nxt in branch[1:]:
                holder = states[req.holder]
                assert on_contact_request(holder, req, nxt, now, states[nxt].seen) is Decision.REPLICATE
                req = req.extended(nxt)
                states[nxt].store(req, now)
            reply = make_message(MessageKind.PARKING_REPLY, D, group, Current(), now, 10**9,
                                 params.hop_limit, ids=ids, dest_node=S, route=req.path)
            for i in range(len(branch) - 2, -1, -1):
                node = branch[i]
                reply = reply.extended(node)
                back = {branch[i - 1]} if i > 0 else set()
                step = on_reply(states[node], reply, now, group=group, params=params,
                                neighbors_in_contact=back)
                assert step.next_hop == (branch[i - 1] if i > 0 else None)
        toward_a.append(states[S].pheromone.level(group, A))
        toward_b.append(states[S].pheromone.level(group, B1))
    return toward_a, toward_b


def recurrence(cycles, tau0, rho, d):
    """tau_1 = tau0 + d, tau_{k+1} = (1 - rho) tau_k + d, iterated directly."""
    out, tau = [], tau0 + d
    for _ in range(cycles):
        out.append(tau)
        tau = (1 - rho) * tau + d
    return out


# --- contact-plan oracle ----------------------------------------------------------

def random_plan(rng, max_nodes=6, max_contacts=12, horizon=9000):
    """Random plan as (node_count, list of (a, b, start, end)) tuples."""
    n = int(rng.integers(3, max_nodes + 1))
    m = int(rng.integers(n - 1, max_contacts + 1))
    out = []
    for _ in range(m):
        a, b = (int(x) for x in rng.choice(n, 2, replace=False))
        s = int(rng.integers(0, horizon))
        out.append((a, b, s, s + int(rng.integers(1, 3000))))
    return n, out


def brute_force_best_delay(contacts, source, t0, is_receiver, max_hops, deadline):
    """Smallest delivery delay over every walk the chromosome decoder can produce.

    Enumerates all simple time-respecting walks of at most ``max_hops`` hops;
    at each step any contact with end > current time toward an unvisited peer
    may be taken, arriving at max(start, current time).  ``is_receiver(n, t)``
    decides valid delivery.  Returns None when no walk delivers.
    """
    best = None

    def visit(node, t, visited, hops):
        nonlocal best
        if t <= deadline and is_receiver(node, t):
            best = t - t0 if best is None else min(best, t - t0)
        if hops == max_hops:
            return
        for a, b, s, e in contacts:
            if node not in (a, b) or e <= t:
                continue
            peer = b if node == a else a
            if peer in visited:
                continue
            visit(peer, max(s, t), visited | {peer}, hops + 1)

    visit(source, t0, {source}, 0)
    return best


# --- hand-built scenarios -----------------------------------------------------------

def make_server(node, group, capacity=5):
    from dtn_parking.parking import CATEGORIES, CategorySlots, ParkingServer, SlotInventory

    inv = SlotInventory({c: CategorySlots(capacity, 10.0) for c in CATEGORIES})
    return ParkingServer(node, group, inv)


def static_scenario(num_nodes, edges, servers, requests, router="epidemic", contacts=None, **kw):
    """Scenario over a fixed topology.

    ``servers`` maps node -> area group; ``requests`` lists (at, vehicle, group)
    or full RequestSpec objects; ``contacts`` overrides the permanent ``edges``.
    """
    from dtn_parking.engine import RequestSpec, RouterKind, Scenario
    from dtn_parking.mobility import static_trace
    from dtn_parking.parking import VehicleCategory

    reqs = [r if isinstance(r, RequestSpec) else RequestSpec(*r, VehicleCategory.CAR) for r in requests]
    return Scenario(
        name="static", num_nodes=num_nodes,
        servers=[make_server(n, g) for n, g in servers.items()],
        contacts=static_trace(edges) if contacts is None else contacts,
        membership=[], requests=reqs, router=RouterKind(router), **kw,
    )
