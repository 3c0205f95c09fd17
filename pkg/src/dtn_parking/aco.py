"""Ant-colony routing: pheromone tables, forward/backward ants and
pheromone-guided unicast.

Parking requests are the forward ants; they flood (hop-limited) until a
parking server accepts them. Replies and booking acks are backward ants: they
retrace the recorded path of the message they answer and, at every hop,
deposit pheromone toward the server's area group on the link they arrived
over. Bookings then follow the pheromone.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .core import GroupId, Message, MessageId, MessageKind, NodeId, SimTime, message_expired


class NonPositiveDeposit(ValueError):
    pass


class ZeroHops(ValueError):
    pass


class NoCandidates(ValueError):
    pass


class EmptyList(ValueError):
    pass


class BrokenPath(ValueError):
    pass


@dataclass(frozen=True)
class AcoParams:
    alpha: float = 1.0
    beta: float = 0.0
    rho: float = 0.1
    q: float = 1.0
    tau0: float = 0.1
    evap_interval: int = 30_000
    floor_eps: float = 1e-6
    hop_limit: int = 8

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise ValueError(f"rho must be in (0, 1], got {self.rho}")
        if self.tau0 <= 0:
            raise ValueError("tau0 must be positive")
        if self.q <= 0:
            raise ValueError("q must be positive")
        if self.floor_eps < 0:
            raise ValueError("floor_eps must be non-negative")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.evap_interval <= 0:
            raise ValueError("evap_interval must be positive")
        if self.hop_limit < 1:
            raise ValueError("hop_limit must be >= 1")


class PheromoneTable:
    """Pheromone levels keyed by (destination group, neighbor).

    Absent entries read as ``tau0`` so unexplored neighbors stay attractive.
    """

    def __init__(self, owner: NodeId, tau0: float = 0.1):
        self.owner = owner
        self.tau0 = tau0
        self.entries: Dict[Tuple[GroupId, NodeId], float] = {}

    def level(self, group: GroupId, neighbor: NodeId) -> float:
        return self.entries.get((group, neighbor), self.tau0)

    def __len__(self):
        return len(self.entries)

    def __repr__(self):
        return f"PheromoneTable(owner={self.owner}, entries={len(self.entries)})"


def evaporate_all(t: PheromoneTable, p: AcoParams) -> PheromoneTable:
    keep = 1.0 - p.rho
    dead = []
    for key, tau in t.entries.items():
        tau *= keep
        if tau < p.floor_eps:
            dead.append(key)
        else:
            t.entries[key] = tau
    for key in dead:
        del t.entries[key]
    return t


def deposit(t: PheromoneTable, group: GroupId, neighbor: NodeId, amount: float) -> PheromoneTable:
    if not amount > 0:
        raise NonPositiveDeposit(f"deposit amount must be positive, got {amount}")
    t.entries[(group, neighbor)] = t.level(group, neighbor) + amount
    return t


def reply_deposit_amount(p: AcoParams, hop_count: int) -> float:
    if hop_count < 1:
        raise ZeroHops("a reply path needs at least one hop")
    return p.q / hop_count


def forward_probabilities(
    t: PheromoneTable,
    p: AcoParams,
    group: GroupId,
    candidates: Sequence[Tuple[NodeId, float]],
) -> List[Tuple[NodeId, float]]:
    """Proportional rule: weight = tau^alpha * eta^beta, normalised."""
    if not candidates:
        raise NoCandidates("no forwarding candidates")
    weights = []
    for nbr, eta in candidates:
        if eta < 0:
            raise ValueError(f"heuristic must be non-negative, got {eta} for {nbr}")
        weights.append(t.level(group, nbr) ** p.alpha * eta ** p.beta)
    total = sum(weights)
    n = len(candidates)
    if total <= 0:
        return [(nbr, 1.0 / n) for nbr, _ in candidates]
    return [(nbr, w / total) for (nbr, _), w in zip(candidates, weights)]


def select_next_hop(probs: Sequence[Tuple[NodeId, float]], u: float) -> NodeId:
    """First neighbor whose cumulative probability strictly exceeds ``u``."""
    if not probs:
        raise EmptyList("empty probability list")
    acc = 0.0
    for nbr, pr in probs:
        acc += pr
        if acc > u:
            return nbr
    # rounding can leave the total a hair below u close to 1
    return probs[-1][0]


class Decision(enum.Enum):
    REPLICATE = "replicate"
    SKIP = "skip"


@dataclass
class RouterState:
    pheromone: PheromoneTable
    seen: Set[MessageId] = field(default_factory=set)
    buffer: Dict[MessageId, Tuple[Message, SimTime]] = field(default_factory=dict)
    reverse_routes: Dict[MessageId, Tuple[NodeId, ...]] = field(default_factory=dict)

    @classmethod
    def for_node(cls, node: NodeId, params: AcoParams) -> "RouterState":
        return cls(PheromoneTable(node, params.tau0))

    @property
    def owner(self) -> NodeId:
        return self.pheromone.owner

    def store(self, m: Message, now: SimTime) -> None:
        self.seen.add(m.id)
        self.buffer[m.id] = (m, now)
        if m.kind is MessageKind.PARKING_REQUEST:
            self.reverse_routes[m.id] = m.path

    def drop_expired(self, now: SimTime) -> List[MessageId]:
        gone = [mid for mid, (m, _) in self.buffer.items() if message_expired(m, now)]
        for mid in gone:
            del self.buffer[mid]
        return gone


def on_contact_request(
    state: RouterState,
    m: Message,
    peer: NodeId,
    now: SimTime,
    peer_seen: Iterable[MessageId] = (),
) -> Decision:
    """Forward-ant flooding with duplicate suppression and a hop limit."""
    if m.kind is not MessageKind.PARKING_REQUEST:
        raise ValueError(f"expected a parking request, got {m.kind}")
    if peer in m.path or m.id in peer_seen:
        return Decision.SKIP
    if message_expired(m, now):
        return Decision.SKIP
    if len(m.path) > m.hop_limit:
        return Decision.SKIP
    return Decision.REPLICATE


@dataclass(frozen=True)
class ReplyStep:
    next_hop: Optional[NodeId]
    fallback: bool = False
    deposits: Tuple[Tuple[GroupId, NodeId, float], ...] = ()

    @property
    def buffered(self) -> bool:
        return self.next_hop is None


def route_candidates(
    m: Message, neighbors_in_contact: Iterable[NodeId]
) -> List[NodeId]:
    return sorted(n for n in neighbors_in_contact if n not in m.path)


def _guided_choice(
    state: RouterState,
    params: AcoParams,
    group: GroupId,
    cands: List[NodeId],
    u: float,
    eta: Optional[Dict[NodeId, float]],
) -> Optional[NodeId]:
    if not cands:
        return None
    pairs = [(n, 1.0 if eta is None else eta.get(n, 1.0)) for n in cands]
    return select_next_hop(forward_probabilities(state.pheromone, params, group, pairs), u)


def on_reply(
    state: RouterState,
    reply: Message,
    now: SimTime,
    *,
    group: GroupId,
    params: AcoParams,
    neighbors_in_contact: Iterable[NodeId] = (),
    enqueued_at: Optional[SimTime] = None,
    reroute_wait: int = 30_000,
    u: float = 0.0,
    eta: Optional[Dict[NodeId, float]] = None,
    arrived: bool = True,
) -> ReplyStep:
    """Backward-ant step at the current holder of ``reply``.

    ``group`` is the area group of the answering server: pheromone toward it
    is laid on the neighbor the reply arrived from. ``arrived`` is False when
    a buffered reply is reconsidered, so deposits are applied once per hop.
    """
    if reply.kind not in (MessageKind.PARKING_REPLY, MessageKind.BOOKING_ACK):
        raise ValueError(f"expected a backward message, got {reply.kind}")
    me = state.owner
    if me not in reply.route:
        raise BrokenPath(f"node {me} is not on recorded path {reply.route}")
    idx = reply.route.index(me)
    deposits = []
    if arrived and len(reply.path) >= 2 and idx + 1 < len(reply.route):
        came_from = reply.path[-2]
        if came_from == reply.route[idx + 1]:
            amount = reply_deposit_amount(params, len(reply.route) - 1)
            deposit(state.pheromone, group, came_from, amount)
            deposits.append((group, came_from, amount))
    if idx == 0:
        return ReplyStep(None, deposits=tuple(deposits))
    contacts = set(neighbors_in_contact)
    back = reply.route[idx - 1]
    if back in contacts and back not in reply.path:
        return ReplyStep(back, deposits=tuple(deposits))
    waited = now - (now if enqueued_at is None else enqueued_at)
    if waited > reroute_wait:
        cands = route_candidates(reply, contacts)
        nxt = _guided_choice(state, params, reply.dest_group, cands, u, eta)
        if nxt is not None:
            return ReplyStep(nxt, fallback=True, deposits=tuple(deposits))
    return ReplyStep(None, deposits=tuple(deposits))


def route_booking(
    state: RouterState,
    m: Message,
    neighbors_in_contact: Iterable[NodeId],
    now: SimTime,
    u: float,
    params: AcoParams,
    eta: Optional[Dict[NodeId, float]] = None,
) -> Optional[NodeId]:
    """Pheromone-guided unicast hop; None means keep buffering.

    Nodes already on the message path are never chosen.
    """
    if m.kind not in (
        MessageKind.BOOKING_REQUEST,
        MessageKind.BOOKING_ACK,
        MessageKind.PARKING_REPLY,
    ):
        raise ValueError(f"route_booking does not route {m.kind}")
    cands = route_candidates(m, neighbors_in_contact)
    return _guided_choice(state, params, m.dest_group, cands, u, eta)
