"""Deterministic discrete-event core.

Contacts and area membership are precomputed (see ``mobility``) and replayed
as events; messages move over contacts with a per-hop latency plus an optional
bandwidth term. A transfer only completes if its contact stays up for the
whole transmission; otherwise it is aborted and the sender keeps the message.
"""

from __future__ import annotations

import copy
import enum
import heapq
import io
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Set, Tuple

from .aco import (
    AcoParams,
    Decision,
    RouterState,
    evaporate_all,
    on_contact_request,
    on_reply,
    route_booking,
)
from .baselines import ContactPlan, GaParams, epidemic_forward, ga_route
from .core import (
    Current,
    DeliveryRecord,
    GroupId,
    IdAllocator,
    Message,
    MessageId,
    MessageKind,
    NodeId,
    SemanticsSpec,
    SimTime,
    make_message,
    message_expired,
)
from .membership import (
    MembershipEvent,
    MembershipHistory,
    MembershipKind,
    earliest_validity,
    history_from_events,
    join,
    valid_receiver,
)
from .mobility import ContactEvent, ContactKind, check_alternation, plan_from_trace
from .parking import (
    AckPayload,
    BookingPayload,
    ParkingServer,
    ReplyPayload,
    RequestPayload,
    SlotInventory,
    VehicleCategory,
    expire_holds,
    reserve_slot,
    vacancy_snapshot,
)
from .rng import Rng


class SchedulingIntoPast(ValueError):
    pass


class InvalidScenario(ValueError):
    def __init__(self, problems: Sequence[str]):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


class EventKind(enum.IntEnum):
    # value doubles as the tie-break rank for events precomputed at one instant
    MEMBERSHIP_CHANGE = 0
    CONTACT_DOWN = 1
    CONTACT_UP = 2
    MESSAGE_CREATE = 3
    MESSAGE_ARRIVE = 4
    MESSAGE_EXPIRE = 5
    EVAPORATION_TICK = 6
    HOLD_EXPIRY_TICK = 7
    DELIVERY_RECHECK = 8
    REROUTE_CHECK = 9


@dataclass(frozen=True)
class Event:
    at: SimTime
    seq: int
    kind: EventKind
    data: Any = None

    def __lt__(self, other: "Event") -> bool:
        return (self.at, self.seq) < (other.at, other.seq)


class EventQueue:
    """Min-heap ordered by (at, seq); seq is assigned when scheduling."""

    def __init__(self, now: SimTime = 0):
        self.now = now
        self._heap: List[Tuple[SimTime, int, Event]] = []
        self._seq = 0

    def __len__(self):
        return len(self._heap)

    def schedule(self, at: SimTime, kind: EventKind, data: Any = None) -> Event:
        if at < self.now:
            raise SchedulingIntoPast(f"event at {at} is before now={self.now}")
        ev = Event(at, self._seq, kind, data)
        self._seq += 1
        heapq.heappush(self._heap, (at, ev.seq, ev))
        return ev

    def peek_time(self) -> Optional[SimTime]:
        return self._heap[0][0] if self._heap else None

    def pop(self) -> Event:
        _, _, ev = heapq.heappop(self._heap)
        self.now = ev.at
        return ev


def schedule(queue: EventQueue, event: Event) -> EventQueue:
    queue.schedule(event.at, event.kind, event.data)
    return queue


DEFAULT_SIZES: Mapping[MessageKind, int] = {
    MessageKind.PARKING_REQUEST: 256,
    MessageKind.PARKING_REPLY: 512,
    MessageKind.BOOKING_REQUEST: 256,
    MessageKind.BOOKING_ACK: 128,
}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 1
    duration: SimTime = 600_000
    movement_dt: int = 1000
    evap_interval: int = 30_000
    per_hop_latency: int = 10
    bandwidth: Optional[int] = None  # bytes/s, None = unlimited
    message_sizes: Mapping[MessageKind, int] = field(default_factory=lambda: dict(DEFAULT_SIZES))

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.per_hop_latency < 0:
            raise ValueError("per_hop_latency must be non-negative")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive or None")


def transmission_delay(cfg: RunConfig, size: int) -> int:
    if cfg.bandwidth is None:
        return cfg.per_hop_latency
    return cfg.per_hop_latency + -(-size * 1000 // cfg.bandwidth)


class RouterKind(enum.Enum):
    ACO = "aco"
    EPIDEMIC = "epidemic"
    GA = "ga"


@dataclass(frozen=True)
class RequestSpec:
    """A parking request the workload issues at ``at`` from ``vehicle``."""

    at: SimTime
    vehicle: NodeId
    group: GroupId
    category: VehicleCategory
    semantics: SemanticsSpec = Current()


@dataclass
class Scenario:
    name: str
    num_nodes: int
    servers: List[ParkingServer]
    contacts: List[ContactEvent]
    membership: List[MembershipEvent]
    requests: List[RequestSpec]
    router: RouterKind = RouterKind.ACO
    aco: AcoParams = AcoParams()
    ga: GaParams = GaParams()
    ttl: int = 300_000
    hold_duration: int = 600_000
    reroute_wait: int = 30_000
    heuristic: str = "none"  # or "contact_recency"
    # per-node stream states to continue from (after mobility/workload draws)
    rng_states: Optional[List[int]] = None

    def validate(self) -> None:
        problems = []
        if self.num_nodes <= 0:
            problems.append("scenario needs at least one node")
        nodes = range(self.num_nodes)
        seen_servers = set()
        for s in self.servers:
            if s.node not in nodes:
                problems.append(f"server node {s.node} out of range")
            if s.node in seen_servers:
                problems.append(f"server node {s.node} listed twice")
            seen_servers.add(s.node)
        last = -1
        for e in self.contacts:
            if e.a not in nodes or e.b not in nodes:
                problems.append(f"contact {e} references unknown node")
            if e.at < last:
                problems.append(f"contact events not time-ordered at {e.at}")
            last = e.at
        try:
            check_alternation(self.contacts)
        except ValueError as exc:
            problems.append(str(exc))
        try:
            history_from_events(self.membership_with_servers())
        except ValueError as exc:
            problems.append(f"membership: {exc}")
        for r in self.requests:
            if r.vehicle not in nodes:
                problems.append(f"request from unknown node {r.vehicle}")
            if r.at < 0:
                problems.append(f"request at negative time {r.at}")
        if self.ttl <= 0:
            problems.append("ttl must be positive")
        if self.hold_duration < 0:
            problems.append("hold_duration must be non-negative")
        if self.heuristic not in ("none", "contact_recency"):
            problems.append(f"unknown heuristic {self.heuristic!r}")
        if self.rng_states is not None and len(self.rng_states) != self.num_nodes:
            problems.append("rng_states must list one state per node")
        if problems:
            raise InvalidScenario(problems)

    def membership_with_servers(self) -> List[MembershipEvent]:
        """Membership events plus permanent joins for servers the script omits."""
        scripted = {e.node for e in self.membership}
        extra = [join(s.node, s.area_group, 0) for s in self.servers if s.node not in scripted]
        return sorted(extra + list(self.membership), key=lambda e: e.at)


@dataclass(frozen=True)
class Transmission:
    id: int
    sender: NodeId
    receiver: NodeId
    message: Message  # replica as it will arrive (path already extended)
    start: SimTime
    end: SimTime
    epoch: int
    move: bool


@dataclass
class BookingLog:
    requests: int = 0
    skipped_full: int = 0
    acks: int = 0
    repeat_acks: int = 0
    rejects: int = 0
    releases: int = 0
    expired_holds: int = 0
    acks_received: int = 0
    rejects_received: int = 0

    def live(self) -> int:
        return self.acks - self.releases - self.expired_holds


# --- metrics -----------------------------------------------------------------

KIND_KEYS = {
    MessageKind.PARKING_REQUEST: "request",
    MessageKind.PARKING_REPLY: "reply",
    MessageKind.BOOKING_REQUEST: "booking",
    MessageKind.BOOKING_ACK: "ack",
}


@dataclass
class KindStats:
    created: int = 0
    delivered: int = 0
    expired: int = 0
    buffered: int = 0
    transmissions: int = 0
    duplicate_deliveries: int = 0
    latencies: List[int] = field(default_factory=list)
    hops: List[int] = field(default_factory=list)

    @property
    def delivery_ratio(self) -> float:
        return self.delivered / self.created if self.created else 0.0


def latency_summary(latencies: Sequence[int]) -> Dict[str, float]:
    """mean / lower median / p95 (value at index ceil(0.95 n) - 1); empty -> {}."""
    if not latencies:
        return {}
    xs = sorted(latencies)
    n = len(xs)
    return {
        "latency_mean": sum(xs) / n,
        "latency_median": xs[(n - 1) // 2],
        "latency_p95": xs[math.ceil(0.95 * n) - 1],
    }


@dataclass
class Metrics:
    kinds: Dict[MessageKind, KindStats]
    transmissions: int
    aborted_transmissions: int
    booking: BookingLog

    @property
    def delivered(self) -> int:
        return sum(k.delivered for k in self.kinds.values())

    @property
    def overhead_ratio(self) -> Optional[float]:
        d = self.delivered
        return self.transmissions / d if d else None

    @property
    def booking_success_ratio(self) -> float:
        b = self.booking
        return b.acks_received / b.requests if b.requests else 0.0

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {}
        for kind in MessageKind:
            st = self.kinds[kind]
            p = KIND_KEYS[kind]
            out[f"{p}_created"] = st.created
            out[f"{p}_delivered"] = st.delivered
            out[f"{p}_delivery_ratio"] = st.delivery_ratio
            out[f"{p}_expired"] = st.expired
            out[f"{p}_buffered"] = st.buffered
            out[f"{p}_transmissions"] = st.transmissions
            out[f"{p}_duplicate_deliveries"] = st.duplicate_deliveries
            if st.delivered:
                out[f"{p}_overhead_ratio"] = st.transmissions / st.delivered
            for k, v in latency_summary(st.latencies).items():
                out[f"{p}_{k}"] = v
            if st.hops:
                out[f"{p}_hops_mean"] = sum(st.hops) / len(st.hops)
        out["transmissions"] = self.transmissions
        out["aborted_transmissions"] = self.aborted_transmissions
        out["delivered"] = self.delivered
        if self.overhead_ratio is not None:
            out["overhead_ratio"] = self.overhead_ratio
        b = self.booking
        out.update(
            booking_requests=b.requests,
            booking_skipped_full=b.skipped_full,
            booking_acks=b.acks,
            booking_repeat_acks=b.repeat_acks,
            booking_rejects=b.rejects,
            booking_releases=b.releases,
            booking_expired_holds=b.expired_holds,
            booking_live=b.live(),
            booking_acks_received=b.acks_received,
            booking_rejects_received=b.rejects_received,
            booking_success_ratio=self.booking_success_ratio,
        )
        return out


def compute_metrics(
    records: Sequence[DeliveryRecord],
    transmissions: Sequence[Tuple[Transmission, bool]],
    booking: BookingLog,
    messages: Mapping[MessageId, Message],
    expired: Set[MessageId] = frozenset(),
    hops: Optional[Mapping[MessageId, int]] = None,
) -> Metrics:
    """Aggregate run logs.

    ``records`` are all delivery records; the first semantics-valid one per
    message counts as its delivery, later valid ones as duplicates.
    ``transmissions`` pairs each transfer with whether it was aborted.
    """
    kinds = {k: KindStats() for k in MessageKind}
    for m in messages.values():
        kinds[m.kind].created += 1
    first: Dict[MessageId, DeliveryRecord] = {}
    for r in records:
        if not r.semantics_valid:
            continue
        st = kinds[messages[r.message].kind]
        if r.message in first:
            st.duplicate_deliveries += 1
            continue
        first[r.message] = r
        st.delivered += 1
        st.latencies.append(r.at - messages[r.message].created)
        if hops is not None and r.message in hops:
            st.hops.append(hops[r.message])
    for mid, m in messages.items():
        if mid in first:
            continue
        if mid in expired:
            kinds[m.kind].expired += 1
        else:
            kinds[m.kind].buffered += 1
    aborted = 0
    for tx, was_aborted in transmissions:
        kinds[tx.message.kind].transmissions += 1
        aborted += was_aborted
    return Metrics(kinds, len(transmissions), aborted, booking)


# --- simulation ----------------------------------------------------------------

@dataclass
class NodeState:
    router: RouterState
    rng: Rng
    neighbors: Set[NodeId] = field(default_factory=set)
    busy: Set[MessageId] = field(default_factory=set)  # single-copy messages in flight
    last_group_contact: Dict[GroupId, SimTime] = field(default_factory=dict)


@dataclass
class RunResult:
    metrics: Metrics
    trace: str
    records: List[DeliveryRecord]
    membership_log: List[MembershipEvent]
    messages: Dict[MessageId, Message]
    servers: Dict[NodeId, ParkingServer]
    transmissions: List[Transmission]
    pheromone: Dict[NodeId, Dict[Tuple[GroupId, NodeId], float]]


_SINGLE_COPY = (MessageKind.PARKING_REPLY, MessageKind.BOOKING_REQUEST, MessageKind.BOOKING_ACK)


class Simulation:
    def __init__(self, scenario: Scenario, cfg: RunConfig,
                 observer: Optional[Callable[["Simulation", Event], None]] = None):
        scenario.validate()
        self.sc = scenario
        self.cfg = cfg
        self.observer = observer
        self.queue = EventQueue()
        self.history = MembershipHistory()
        self.membership_log: List[MembershipEvent] = []
        self.ids = IdAllocator()
        self.booking_ids = IdAllocator()
        n = scenario.num_nodes
        states = scenario.rng_states or [Rng.for_node(cfg.seed, i).state for i in range(n)]
        self.nodes = [
            NodeState(RouterState.for_node(i, scenario.aco), Rng(states[i])) for i in range(n)
        ]
        self.servers: Dict[NodeId, ParkingServer] = {}
        for s in scenario.servers:
            self.servers[s.node] = ParkingServer(
                s.node, s.area_group, SlotInventory(copy.deepcopy(dict(s.inventory))),
                new_booking_id=self.booking_ids,
            )
        self.epoch: Dict[Tuple[NodeId, NodeId], int] = {}
        self.in_flight: Dict[Tuple[NodeId, NodeId], List[int]] = {}
        self.pending_to: Set[Tuple[NodeId, MessageId]] = set()
        self.transmissions: List[Transmission] = []
        self.aborted: Set[int] = set()
        self.messages: Dict[MessageId, Message] = {}
        self.holders: Dict[MessageId, Set[NodeId]] = {}
        self.records: List[DeliveryRecord] = []
        self.delivered: Dict[MessageId, DeliveryRecord] = {}
        self.delivered_hops: Dict[MessageId, int] = {}
        self.expired: Set[MessageId] = set()
        self.booking = BookingLog()
        self.request_home: Dict[MessageId, GroupId] = {}
        self.request_category: Dict[MessageId, VehicleCategory] = {}
        self.answered: Set[Tuple[NodeId, MessageId]] = set()
        self.request_booked: Set[MessageId] = set()
        self.ga_routes: Dict[MessageId, Tuple[NodeId, ...]] = {}
        self._trace = io.StringIO()
        self._trace.write("time_ms,event_type,node,peer,message_id,detail\n")
        self._ga_plan: Optional[ContactPlan] = None
        self._ga_history: Optional[MembershipHistory] = None
        self._prime()

    # -- setup ------------------------------------------------------------------

    def _prime(self) -> None:
        sc = self.sc
        initial: List[Tuple[SimTime, int, int, EventKind, Any]] = []
        for i, e in enumerate(sc.membership_with_servers()):
            initial.append((e.at, EventKind.MEMBERSHIP_CHANGE, i, EventKind.MEMBERSHIP_CHANGE, e))
        for i, e in enumerate(sc.contacts):
            k = EventKind.CONTACT_UP if e.kind is ContactKind.UP else EventKind.CONTACT_DOWN
            initial.append((e.at, k, i, k, e))
        for i, r in enumerate(sorted(sc.requests, key=lambda r: (r.at, r.vehicle))):
            initial.append((r.at, EventKind.MESSAGE_CREATE, i, EventKind.MESSAGE_CREATE, r))
        initial.sort(key=lambda x: (x[0], x[1], x[2]))
        for at, _, _, kind, data in initial:
            self.queue.schedule(at, kind, data)
        if sc.router is RouterKind.ACO:
            self.queue.schedule(self.cfg.evap_interval, EventKind.EVAPORATION_TICK)

    def _ga_setup(self) -> None:
        if self._ga_plan is None:
            self._ga_plan = plan_from_trace(self.sc.contacts, self.cfg.duration + 1)
            server_events = [e for e in self.sc.membership_with_servers() if e.node in self.servers]
            self._ga_history = history_from_events(server_events)

    # -- trace ------------------------------------------------------------------

    def trace(self, kind: str, node: Any = "", peer: Any = "", mid: Any = "", detail: Any = "") -> None:
        self._trace.write(f"{self.queue.now},{kind},{node},{peer},{mid},{detail}\n")

    # -- main loop ----------------------------------------------------------------

    def run(self) -> RunResult:
        handlers = {
            EventKind.MEMBERSHIP_CHANGE: self._on_membership,
            EventKind.CONTACT_UP: self._on_contact_up,
            EventKind.CONTACT_DOWN: self._on_contact_down,
            EventKind.MESSAGE_CREATE: self._on_create,
            EventKind.MESSAGE_ARRIVE: self._on_arrive,
            EventKind.MESSAGE_EXPIRE: self._on_expire,
            EventKind.EVAPORATION_TICK: self._on_evaporate,
            EventKind.HOLD_EXPIRY_TICK: self._on_hold_expiry,
            EventKind.DELIVERY_RECHECK: self._on_recheck,
            EventKind.REROUTE_CHECK: self._on_reroute_check,
        }
        while self.queue:
            nxt = self.queue.peek_time()
            if nxt > self.cfg.duration:
                break
            ev = self.queue.pop()
            handlers[ev.kind](ev.data)
            if self.observer is not None:
                self.observer(self, ev)
        return self._result()

    def _result(self) -> RunResult:
        tx = [(t, t.id in self.aborted) for t in self.transmissions]
        metrics = compute_metrics(
            self.records, tx, self.booking, self.messages, self.expired, self.delivered_hops
        )
        pher = {i: dict(sorted(n.router.pheromone.entries.items())) for i, n in enumerate(self.nodes)}
        return RunResult(
            metrics, self._trace.getvalue(), self.records, self.membership_log,
            self.messages, self.servers, self.transmissions, pher,
        )

    # -- membership / contacts ---------------------------------------------------

    def _on_membership(self, e: MembershipEvent) -> None:
        self.history.apply(e)
        self.membership_log.append(e)
        self.trace("join" if e.kind is MembershipKind.JOIN else "leave", e.node, "", "", e.group)
        if e.kind is MembershipKind.JOIN and e.node in self.servers:
            self._recheck_node(e.node)

    def _touch_groups(self, a: NodeId, b: NodeId) -> None:
        now = self.queue.now
        for x, y in ((a, b), (b, a)):
            last = self.nodes[x].last_group_contact
            for g in self.history.current_groups(y):
                last[g] = now

    def _on_contact_up(self, e: ContactEvent) -> None:
        a, b = e.a, e.b
        self.nodes[a].neighbors.add(b)
        self.nodes[b].neighbors.add(a)
        self.epoch[(a, b)] = self.epoch.get((a, b), 0) + 1
        self._touch_groups(a, b)
        self.trace("contact_up", a, b)
        self._service(a)
        self._service(b)

    def _on_contact_down(self, e: ContactEvent) -> None:
        a, b = e.a, e.b
        self.nodes[a].neighbors.discard(b)
        self.nodes[b].neighbors.discard(a)
        self._touch_groups(a, b)
        self.trace("contact_down", a, b)
        senders = set()
        for txid in self.in_flight.pop((a, b), []):
            tx = self.transmissions[txid]
            self.aborted.add(txid)
            self.pending_to.discard((tx.receiver, tx.message.id))
            if tx.move:
                self.nodes[tx.sender].busy.discard(tx.message.id)
            self.trace("abort", tx.sender, tx.receiver, tx.message.id)
            senders.add(tx.sender)
        for s in sorted(senders):
            self._service(s)

    # -- message lifecycle ---------------------------------------------------------

    def _new_message(self, kind: MessageKind, source: NodeId, dest_group: GroupId,
                     semantics: SemanticsSpec, payload: Any, **kw) -> Message:
        m = make_message(kind, source, dest_group, semantics, self.queue.now, self.sc.ttl,
                         self.sc.aco.hop_limit, payload, ids=self.ids, **kw)
        self.messages[m.id] = m
        self.queue.schedule(m.created + m.ttl + 1, EventKind.MESSAGE_EXPIRE, m.id)
        self.trace("create", source, "" if m.dest_node is None else m.dest_node, m.id,
                   f"{KIND_KEYS[kind]}:g{dest_group}")
        if self.sc.router is RouterKind.GA:
            self._plan_ga(m)
        return m

    def _on_create(self, r: RequestSpec) -> None:
        groups = self.history.current_groups(r.vehicle)
        home = min(groups) if groups else r.group
        m = self._new_message(MessageKind.PARKING_REQUEST, r.vehicle, r.group, r.semantics,
                              RequestPayload(r.category))
        self.request_home[m.id] = home
        self.request_category[m.id] = r.category
        self._store(r.vehicle, m)
        self._service(r.vehicle)

    def _store(self, node: NodeId, m: Message) -> None:
        self.nodes[node].router.store(m, self.queue.now)
        self.holders.setdefault(m.id, set()).add(node)

    def _unstore(self, node: NodeId, mid: MessageId) -> None:
        self.nodes[node].router.buffer.pop(mid, None)
        self.nodes[node].busy.discard(mid)
        hs = self.holders.get(mid)
        if hs is not None:
            hs.discard(node)

    def _on_expire(self, mid: MessageId) -> None:
        if mid not in self.delivered:
            self.expired.add(mid)
        for node in sorted(self.holders.get(mid, ())):
            self._unstore(node, mid)
        self.trace("expire", "", "", mid, "delivered" if mid in self.delivered else "undelivered")

    def _send(self, sender: NodeId, receiver: NodeId, m: Message, move: bool) -> None:
        now = self.queue.now
        pair = (min(sender, receiver), max(sender, receiver))
        delay = transmission_delay(self.cfg, self.cfg.message_sizes[m.kind])
        tx = Transmission(len(self.transmissions), sender, receiver, m.extended(receiver),
                          now, now + delay, self.epoch[pair], move)
        self.transmissions.append(tx)
        self.in_flight.setdefault(pair, []).append(tx.id)
        self.pending_to.add((receiver, m.id))
        if move:
            self.nodes[sender].busy.add(m.id)
        self.trace("send", sender, receiver, m.id, KIND_KEYS[m.kind])
        self.queue.schedule(now + delay, EventKind.MESSAGE_ARRIVE, tx.id)

    def _on_arrive(self, txid: int) -> None:
        if txid in self.aborted:
            return
        tx = self.transmissions[txid]
        pair = (min(tx.sender, tx.receiver), max(tx.sender, tx.receiver))
        flying = self.in_flight.get(pair, [])
        if txid in flying:
            flying.remove(txid)
        self.pending_to.discard((tx.receiver, tx.message.id))
        m = tx.message
        if tx.move:
            self._unstore(tx.sender, m.id)
        if m.id in self.expired or message_expired(m, self.queue.now) or m.id not in self.messages:
            self.trace("drop", tx.receiver, tx.sender, m.id, "expired")
            return
        self.trace("arrive", tx.receiver, tx.sender, m.id, m.hops)
        self._receive(tx.receiver, m)

    def _receive(self, node: NodeId, m: Message) -> None:
        st = self.nodes[node].router
        if m.id in st.seen:
            self.trace("duplicate_arrival", node, "", m.id)
            return
        if m.kind is MessageKind.PARKING_REQUEST:
            if node in self.servers:
                valid = valid_receiver(m.semantics, self.history, node, m.dest_group, self.queue.now)
                self.records.append(DeliveryRecord(m.id, node, self.queue.now, valid))
                if valid:
                    st.seen.add(m.id)
                    self._deliver(node, m)
                    return
                self._schedule_recheck(node, m)
            self._store(node, m)
            self._service(node)
            return
        if m.dest_node == node:
            st.seen.add(m.id)
            self.records.append(DeliveryRecord(m.id, node, self.queue.now, True))
            if self.sc.router is RouterKind.ACO and m.kind in (
                MessageKind.PARKING_REPLY, MessageKind.BOOKING_ACK
            ) and node in m.route:
                # final hop of a backward ant still lays pheromone
                on_reply(st, m, self.queue.now, group=self._server_group(m), params=self.sc.aco)
            self._deliver(node, m)
            return
        self._store(node, m)
        if m.kind in (MessageKind.PARKING_REPLY, MessageKind.BOOKING_ACK) \
                and self.sc.router is RouterKind.ACO:
            self.queue.schedule(self.queue.now + self.sc.reroute_wait + 1,
                                EventKind.REROUTE_CHECK, (node, m.id))
        self._service_message(node, m, arrived=True)

    def _schedule_recheck(self, node: NodeId, m: Message) -> None:
        t = earliest_validity(m.semantics, self.queue.now)
        if t is not None and t <= m.expires_at:
            self.queue.schedule(t, EventKind.DELIVERY_RECHECK, (node, m.id))

    def _on_recheck(self, data: Tuple[NodeId, MessageId]) -> None:
        node, mid = data
        entry = self.nodes[node].router.buffer.get(mid)
        if entry is not None:
            self._try_late_delivery(node, entry[0])

    def _recheck_node(self, node: NodeId) -> None:
        for m, _ in list(self.nodes[node].router.buffer.values()):
            if m.kind is MessageKind.PARKING_REQUEST:
                self._try_late_delivery(node, m)

    def _try_late_delivery(self, node: NodeId, m: Message) -> None:
        if m.id in self.nodes[node].busy or message_expired(m, self.queue.now):
            return
        if valid_receiver(m.semantics, self.history, node, m.dest_group, self.queue.now):
            self.records.append(DeliveryRecord(m.id, node, self.queue.now, True))
            self._unstore(node, m.id)
            self._deliver(node, m)

    def _deliver(self, node: NodeId, m: Message) -> None:
        now = self.queue.now
        first = m.id not in self.delivered
        if first:
            self.delivered[m.id] = self.records[-1]
            self.delivered_hops[m.id] = m.hops
        self.trace("deliver" if first else "duplicate_delivery", node, m.source, m.id, m.hops)
        if m.kind is MessageKind.PARKING_REQUEST:
            self._server_reply(node, m)
        elif m.kind is MessageKind.PARKING_REPLY:
            self._vehicle_book(node, m)
        elif m.kind is MessageKind.BOOKING_REQUEST:
            self._server_book(node, m)
        else:
            ack: AckPayload = m.payload
            if ack.ack.accepted:
                self.booking.acks_received += 1
            else:
                self.booking.rejects_received += 1
            self.trace("booking_confirmed" if ack.ack.accepted else "booking_rejected",
                       node, ack.server, m.id, ack.ack.booking_id if ack.ack.accepted else ack.ack.reject_reason)

    # -- parking workflow ----------------------------------------------------------

    def _server_reply(self, node: NodeId, req: Message) -> None:
        if (node, req.id) in self.answered:
            return
        self.answered.add((node, req.id))
        srv = self.servers[node]
        payload = ReplyPayload(srv.area_group, node, vacancy_snapshot(srv))
        reply = self._new_message(
            MessageKind.PARKING_REPLY, node, self.request_home.get(req.id, req.dest_group),
            Current(), payload, dest_node=req.source, route=req.path, in_reply_to=req.id,
        )
        self._store(node, reply)
        self._service(node)

    def _vehicle_book(self, node: NodeId, reply: Message) -> None:
        req_id = reply.in_reply_to
        if req_id in self.request_booked:
            return
        self.request_booked.add(req_id)
        cat = self.request_category[req_id]
        payload: ReplyPayload = reply.payload
        if payload.free(cat) <= 0:
            self.booking.skipped_full += 1
            self.trace("booking_skipped", node, payload.server, req_id, "full")
            return
        booking = self._new_message(
            MessageKind.BOOKING_REQUEST, node, payload.area_group, Current(),
            BookingPayload(cat, req_id, payload.area_group), dest_node=payload.server,
            in_reply_to=reply.id,
        )
        self.booking.requests += 1
        self._store(node, booking)
        self._service(node)

    def _server_book(self, node: NodeId, booking: Message) -> None:
        srv = self.servers.get(node)
        if srv is None:
            return
        bp: BookingPayload = booking.payload
        before = len(srv.bookings)
        ack = reserve_slot(srv, bp.category, booking.source, self.queue.now, self.sc.hold_duration)
        if ack.accepted and len(srv.bookings) > before:
            self.booking.acks += 1
            expiry = srv.bookings[ack.booking_id].hold_expiry
            self.queue.schedule(expiry + 1, EventKind.HOLD_EXPIRY_TICK, node)
            self.trace("reserve", node, booking.source, booking.id, ack.booking_id)
        elif ack.accepted:
            self.booking.repeat_acks += 1
            self.trace("reserve_repeat", node, booking.source, booking.id, ack.booking_id)
        else:
            self.booking.rejects += 1
            self.trace("reserve_reject", node, booking.source, booking.id, ack.reject_reason)
        home = self.request_home.get(bp.request, srv.area_group)
        msg = self._new_message(
            MessageKind.BOOKING_ACK, node, home, Current(),
            AckPayload(ack, srv.area_group, node, bp.category),
            dest_node=booking.source, route=booking.path, in_reply_to=booking.id,
        )
        self._store(node, msg)
        self._service(node)

    def _on_hold_expiry(self, node: NodeId) -> None:
        gone = expire_holds(self.servers[node], self.queue.now)
        self.booking.expired_holds += len(gone)
        for bid in gone:
            self.trace("hold_expired", node, "", "", bid)

    def _on_evaporate(self, _data: Any) -> None:
        for n in self.nodes:
            evaporate_all(n.router.pheromone, self.sc.aco)
        self.trace("evaporate", "", "", "", sum(len(n.router.pheromone) for n in self.nodes))
        nxt = self.queue.now + self.cfg.evap_interval
        if nxt <= self.cfg.duration:
            self.queue.schedule(nxt, EventKind.EVAPORATION_TICK)

    def _on_reroute_check(self, data: Tuple[NodeId, MessageId]) -> None:
        node, mid = data
        entry = self.nodes[node].router.buffer.get(mid)
        if entry is not None:
            self._service_message(node, entry[0])

    # -- routing -------------------------------------------------------------------

    def _server_group(self, m: Message) -> GroupId:
        return m.payload.area_group

    def _eta(self, node: NodeId, cands: Sequence[NodeId], group: GroupId) -> Optional[Dict[NodeId, float]]:
        if self.sc.heuristic != "contact_recency":
            return None
        now = self.queue.now
        out = {}
        for c in cands:
            if group in self.history.current_groups(c) or any(
                group in self.history.current_groups(x) for x in self.nodes[c].neighbors
            ):
                out[c] = 1.0
                continue
            last = self.nodes[c].last_group_contact.get(group)
            out[c] = 0.0 if last is None else 1.0 / (1.0 + (now - last) / 1000.0)
        return out

    def _service(self, node: NodeId) -> None:
        ns = self.nodes[node]
        if not ns.neighbors:
            return
        for m, _ in list(ns.router.buffer.values()):
            if m.id in ns.router.buffer:
                self._service_message(node, m)

    def _peer_has(self, peer: NodeId, mid: MessageId) -> bool:
        return mid in self.nodes[peer].router.seen or (peer, mid) in self.pending_to

    def _service_message(self, node: NodeId, m: Message, arrived: bool = False) -> None:
        ns = self.nodes[node]
        now = self.queue.now
        if message_expired(m, now):
            return
        router = self.sc.router
        if m.kind in _SINGLE_COPY and router is not RouterKind.EPIDEMIC:
            self._route_unicast(node, m, arrived)
            return
        if not ns.neighbors:
            return
        if router is RouterKind.GA:
            self._route_ga(node, m)
            return
        for peer in sorted(ns.neighbors):
            if router is RouterKind.ACO:
                d = on_contact_request(ns.router, m, peer, now, self.nodes[peer].router.seen)
            else:
                d = epidemic_forward(ns.router, m, peer, now, self.nodes[peer].router.seen)
            if d is Decision.REPLICATE and (peer, m.id) not in self.pending_to:
                self._send(node, peer, m, move=False)

    def _route_unicast(self, node: NodeId, m: Message, arrived: bool) -> None:
        ns = self.nodes[node]
        now = self.queue.now
        aco = self.sc.router is RouterKind.ACO
        backward = m.kind is not MessageKind.BOOKING_REQUEST
        if aco and backward and arrived and node in m.route:
            # deposit on arrival even if nothing is in contact right now
            step = on_reply(ns.router, m, now, group=self._server_group(m), params=self.sc.aco)
            for g, nbr, amount in step.deposits:
                self.trace("deposit", node, nbr, m.id, f"g{g}:{amount!r}")
        if m.id in ns.busy or not ns.neighbors:
            return
        if m.dest_node in ns.neighbors and not self._peer_has(m.dest_node, m.id):
            self._send(node, m.dest_node, m, move=True)
            return
        if not aco:
            self._route_ga(node, m)
            return
        cands = sorted(p for p in ns.neighbors if p not in m.path and not self._peer_has(p, m.id))
        if not cands:
            return
        nxt = None
        if backward and node in m.route:
            enq = ns.router.buffer.get(m.id, (m, now))[1]
            step = on_reply(ns.router, m, now, group=self._server_group(m), params=self.sc.aco,
                            neighbors_in_contact=cands, enqueued_at=enq,
                            reroute_wait=self.sc.reroute_wait, u=ns.rng.random(),
                            eta=self._eta(node, cands, m.dest_group), arrived=False)
            nxt = step.next_hop
            if step.fallback:
                self.trace("fallback", node, nxt, m.id)
        elif not backward and len(m.path) > m.hop_limit:
            return
        else:
            # bookings, and backward messages already off their recorded path
            nxt = route_booking(ns.router, m, cands, now, ns.rng.random(), self.sc.aco,
                                self._eta(node, cands, m.dest_group))
        if nxt is not None:
            self._send(node, nxt, m, move=True)

    # -- GA baseline -----------------------------------------------------------------

    def _plan_ga(self, m: Message) -> None:
        self._ga_setup()
        now = m.created
        plan = self._ga_plan.window(now, now + m.ttl)
        if m.kind.is_anycast:
            group, hist = m.dest_group, self._ga_history
        else:
            # unicast: the destination is the only member of a private group
            group, hist = -1, history_from_events([join(m.dest_node, -1, 0)])
        res = ga_route(plan, m.source, now, group, hist, m.semantics, m.ttl, self.sc.ga,
                       self.nodes[m.source].rng)
        if res.delivered:
            route = tuple(n for n, _ in res.path[: res.delivery_index + 1])
        else:
            route = (m.source,)
        self.ga_routes[m.id] = route
        self.trace("ga_route", m.source, "", m.id, "-".join(map(str, route)))

    def _route_ga(self, node: NodeId, m: Message) -> None:
        ns = self.nodes[node]
        if m.id in ns.busy:
            return
        route = self.ga_routes.get(m.id, ())
        nxt = None
        if node in route:
            i = route.index(node)
            if i + 1 < len(route) and route[i + 1] in ns.neighbors:
                nxt = route[i + 1]
        if nxt is None and m.kind.is_anycast:
            # direct hand-over to a server that accepts it now
            for p in sorted(ns.neighbors):
                if p in self.servers and valid_receiver(
                    m.semantics, self.history, p, m.dest_group, self.queue.now
                ):
                    nxt = p
                    break
        if nxt is not None and not self._peer_has(nxt, m.id) and nxt not in m.path:
            self._send(node, nxt, m, move=True)


def run_simulation(
    scenario: Scenario,
    cfg: RunConfig,
    observer: Optional[Callable[[Simulation, Event], None]] = None,
) -> RunResult:
    """Run one (scenario, seed) to completion; deterministic given ``cfg.seed``."""
    return Simulation(scenario, cfg, observer).run()


def metrics_document(result: RunResult, scenario: Scenario, cfg: RunConfig) -> Dict[str, Any]:
    doc: Dict[str, Any] = {"scenario": scenario.name, "router": scenario.router.value, "seed": cfg.seed}
    doc.update(result.metrics.to_dict())
    return doc
