"""Random-waypoint motion, radio-range contacts, area membership and the
ASCII contact trace / contact plan formats.

Trace lines are ``time_ms,nodeA,nodeB,U|D`` with ``nodeA < nodeB``; plan lines
are ``nodeA,nodeB,start_ms,end_ms``. Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Optional, Sequence, Set, TextIO, Tuple, Union

import numpy as np

from .baselines import Contact, ContactPlan
from .core import GroupId, NodeId, SimTime
from .membership import MembershipEvent, MembershipKind
from .rng import Rng


class TraceParseError(ValueError):
    def __init__(self, line_no: int, msg: str):
        super().__init__(f"line {line_no}: {msg}")
        self.line_no = line_no


class NonMonotoneTime(TraceParseError):
    pass


class OverlappingRegions(ValueError):
    pass


@dataclass(frozen=True)
class Arena:
    width: float = 1000.0
    height: float = 1000.0

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.width and 0.0 <= y <= self.height


@dataclass(frozen=True)
class MobilityParams:
    v_min: float = 5.0
    v_max: float = 15.0
    pause_max: int = 10_000  # ms

    def __post_init__(self):
        if not 0 < self.v_min <= self.v_max:
            raise ValueError("speeds must satisfy 0 < v_min <= v_max")
        if self.pause_max < 0:
            raise ValueError("pause_max must be non-negative")


@dataclass(frozen=True)
class MotionState:
    pos: Tuple[float, float]
    waypoint: Tuple[float, float]
    speed: float  # m/s
    pause_until: SimTime = 0


def random_point(arena: Arena, rng: Rng) -> Tuple[float, float]:
    return (rng.uniform(0.0, arena.width), rng.uniform(0.0, arena.height))


def initial_motion(arena: Arena, params: MobilityParams, rng: Rng) -> MotionState:
    pos = random_point(arena, rng)
    wp = random_point(arena, rng)
    return MotionState(pos, wp, rng.uniform(params.v_min, params.v_max), 0)


def step_random_waypoint(
    s: MotionState,
    dt: int,
    arena: Arena,
    rng: Rng,
    now: SimTime = 0,
    params: MobilityParams = MobilityParams(),
) -> MotionState:
    """Advance one tick of ``dt`` ms starting at ``now``.

    Arrival snaps to the waypoint and draws the next leg (waypoint, speed,
    pause); any leftover travel in the tick is discarded.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if now < s.pause_until:
        return s
    (x, y), (wx, wy) = s.pos, s.waypoint
    dx, dy = wx - x, wy - y
    dist = math.hypot(dx, dy)
    reach = s.speed * dt / 1000.0
    if dist <= reach:
        wp = random_point(arena, rng)
        speed = rng.uniform(params.v_min, params.v_max)
        pause = int(rng.uniform(0.0, float(params.pause_max)))
        return MotionState((wx, wy), wp, speed, now + dt + pause)
    f = reach / dist
    return replace(s, pos=(x + dx * f, y + dy * f))


class ContactKind(enum.Enum):
    UP = "U"
    DOWN = "D"


@dataclass(frozen=True, order=True)
class ContactEvent:
    at: SimTime
    a: NodeId
    b: NodeId
    kind: ContactKind

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"contact endpoints must satisfy a < b, got {self.a}, {self.b}")


def in_range_matrix(pos: np.ndarray, r: float) -> np.ndarray:
    pos = np.asarray(pos, dtype=np.float64)
    d2 = ((pos[:, None, :] - pos[None, :, :]) ** 2).sum(axis=-1)
    close = d2 <= r * r
    np.fill_diagonal(close, False)
    return close


def detect_contact_events(
    prev: np.ndarray, curr: np.ndarray, r: float, now: SimTime
) -> List[ContactEvent]:
    """Range crossings between two position snapshots (distance r counts as in contact)."""
    prev, curr = np.asarray(prev), np.asarray(curr)
    if prev.shape != curr.shape:
        raise ValueError("prev and curr must cover the same nodes")
    return contact_changes(in_range_matrix(prev, r), in_range_matrix(curr, r), now)


def contact_changes(before: np.ndarray, after: np.ndarray, now: SimTime) -> List[ContactEvent]:
    diff = np.triu(before != after, k=1)
    out = []
    for a, b in zip(*np.nonzero(diff)):
        kind = ContactKind.UP if after[a, b] else ContactKind.DOWN
        out.append(ContactEvent(now, int(a), int(b), kind))
    return out


@dataclass(frozen=True)
class Region:
    group: GroupId
    rect: Tuple[float, float, float, float]  # x0, y0, x1, y1

    def __post_init__(self):
        x0, y0, x1, y1 = self.rect
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"region rect must satisfy x0 < x1 and y0 < y1: {self.rect}")

    def contains(self, x: float, y: float) -> bool:
        x0, y0, x1, y1 = self.rect
        return x0 <= x < x1 and y0 <= y < y1

    def overlaps(self, other: "Region") -> bool:
        ax0, ay0, ax1, ay1 = self.rect
        bx0, by0, bx1, by1 = other.rect
        return ax0 < bx1 and bx0 < ax1 and ay0 < by1 and by0 < ay1


def check_regions(regions: Sequence[Region]) -> None:
    for i, a in enumerate(regions):
        for b in regions[i + 1 :]:
            if a.group == b.group and a.overlaps(b):
                raise OverlappingRegions(f"group {a.group}: rects {a.rect} and {b.rect} overlap")


def region_groups(x: float, y: float, regions: Sequence[Region]) -> Set[GroupId]:
    return {r.group for r in regions if r.contains(x, y)}


def derive_region_membership(
    prev: Optional[np.ndarray],
    curr: np.ndarray,
    regions: Sequence[Region],
    now: SimTime,
    nodes: Optional[Sequence[NodeId]] = None,
) -> List[MembershipEvent]:
    """Join/Leave events for nodes crossing region boundaries.

    ``prev=None`` means no node was a member before (initial placement).
    ``nodes`` maps row indices to node ids; rows are ids by default.
    """
    curr = np.asarray(curr)
    ids = list(range(len(curr))) if nodes is None else list(nodes)
    out = []
    for row, node in enumerate(ids):
        after = region_groups(curr[row, 0], curr[row, 1], regions)
        before = set() if prev is None else region_groups(prev[row, 0], prev[row, 1], regions)
        for g in sorted(before - after):
            out.append(MembershipEvent(now, node, g, MembershipKind.LEAVE))
        for g in sorted(after - before):
            out.append(MembershipEvent(now, node, g, MembershipKind.JOIN))
    return out


# --- trace / plan files -------------------------------------------------------

def _lines(stream: Union[str, TextIO]) -> Iterable[Tuple[int, str]]:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    for i, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield i, line


def _int(field: str, line_no: int, what: str) -> int:
    try:
        v = int(field)
    except ValueError:
        raise TraceParseError(line_no, f"{what} is not an integer: {field!r}") from None
    if v < 0:
        raise TraceParseError(line_no, f"{what} must be non-negative: {v}")
    return v


def load_contact_trace(stream: Union[str, TextIO]) -> List[ContactEvent]:
    events = []
    last = -1
    for no, line in _lines(stream):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise TraceParseError(no, f"expected 4 fields, got {len(parts)}")
        at = _int(parts[0], no, "time")
        a = _int(parts[1], no, "nodeA")
        b = _int(parts[2], no, "nodeB")
        if not a < b:
            raise TraceParseError(no, f"node ids must satisfy nodeA < nodeB, got {a},{b}")
        try:
            kind = ContactKind(parts[3])
        except ValueError:
            raise TraceParseError(no, f"event kind must be U or D, got {parts[3]!r}") from None
        if at < last:
            raise NonMonotoneTime(no, f"time {at} precedes {last}")
        last = at
        events.append(ContactEvent(at, a, b, kind))
    return events


def save_contact_trace(events: Iterable[ContactEvent], stream: Optional[TextIO] = None) -> str:
    text = "".join(f"{e.at},{e.a},{e.b},{e.kind.value}\n" for e in events)
    if stream is not None:
        stream.write(text)
    return text


def load_contact_plan(stream: Union[str, TextIO]) -> ContactPlan:
    contacts = []
    for no, line in _lines(stream):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise TraceParseError(no, f"expected 4 fields, got {len(parts)}")
        a, b, s, e = (_int(p, no, w) for p, w in zip(parts, ("nodeA", "nodeB", "start", "end")))
        if a == b:
            raise TraceParseError(no, "a contact needs two distinct nodes")
        if not s < e:
            raise TraceParseError(no, f"window must satisfy start < end, got {s},{e}")
        contacts.append(Contact(a, b, s, e))
    return ContactPlan(contacts)


def save_contact_plan(plan: ContactPlan, stream: Optional[TextIO] = None) -> str:
    text = "".join(f"{c.a},{c.b},{c.start},{c.end}\n" for c in plan.contacts)
    if stream is not None:
        stream.write(text)
    return text


def check_alternation(events: Iterable[ContactEvent]) -> None:
    """Raise ValueError unless per-pair events alternate U/D starting with U."""
    up: Dict[Tuple[NodeId, NodeId], bool] = {}
    for e in events:
        key = (e.a, e.b)
        is_up = up.get(key, False)
        if (e.kind is ContactKind.UP) == is_up:
            raise ValueError(f"contact {key} {e.kind.value} at {e.at} breaks U/D alternation")
        up[key] = not is_up


def plan_from_trace(events: Iterable[ContactEvent], end: SimTime) -> ContactPlan:
    """Contact windows from a trace; contacts still up at the end close at ``end``."""
    opened: Dict[Tuple[NodeId, NodeId], SimTime] = {}
    contacts = []
    for e in events:
        key = (e.a, e.b)
        if e.kind is ContactKind.UP:
            opened[key] = e.at
        else:
            s = opened.pop(key)
            if s < e.at:
                contacts.append(Contact(e.a, e.b, s, e.at))
    for (a, b), s in opened.items():
        if s < end:
            contacts.append(Contact(a, b, s, end))
    return ContactPlan(contacts)


def static_trace(edges: Iterable[Tuple[NodeId, NodeId]], at: SimTime = 0) -> List[ContactEvent]:
    """Permanent contacts for a static topology, all coming up at ``at``."""
    pairs = sorted({(min(a, b), max(a, b)) for a, b in edges})
    return [ContactEvent(at, a, b, ContactKind.UP) for a, b in pairs]


@dataclass
class MobilityResult:
    contacts: List[ContactEvent]
    membership: List[MembershipEvent]
    positions: np.ndarray  # (ticks + 1, nodes, 2)


def simulate_mobility(
    n_vehicles: int,
    static_positions: Sequence[Tuple[float, float]],
    arena: Arena,
    params: MobilityParams,
    radio_range: float,
    regions: Sequence[Region],
    duration: SimTime,
    dt: int,
    rngs: Sequence[Rng],
    keep_positions: bool = False,
) -> MobilityResult:
    """Precompute the whole run's contact and region-membership events.

    Vehicles are nodes ``0..n_vehicles-1`` and move; the stationary nodes that
    follow keep ``static_positions``. Only vehicles get region membership.
    """
    states = [initial_motion(arena, params, rngs[i]) for i in range(n_vehicles)]
    fixed = np.asarray(static_positions, dtype=np.float64).reshape(-1, 2)

    def snapshot() -> np.ndarray:
        mobile = np.array([s.pos for s in states], dtype=np.float64).reshape(-1, 2)
        return np.vstack([mobile, fixed])

    pos = snapshot()
    close = in_range_matrix(pos, radio_range)
    contacts = contact_changes(np.zeros_like(close), close, 0)
    vehicles = list(range(n_vehicles))
    membership = derive_region_membership(None, pos[:n_vehicles], regions, 0, vehicles)
    history = [pos] if keep_positions else []
    t = 0
    while t + dt <= duration:
        states = [
            step_random_waypoint(s, dt, arena, rngs[i], t, params) for i, s in enumerate(states)
        ]
        t += dt
        new_pos = snapshot()
        new_close = in_range_matrix(new_pos, radio_range)
        contacts.extend(contact_changes(close, new_close, t))
        membership.extend(
            derive_region_membership(pos[:n_vehicles], new_pos[:n_vehicles], regions, t, vehicles)
        )
        pos, close = new_pos, new_close
        if keep_positions:
            history.append(pos)
    positions = np.stack(history) if keep_positions else np.zeros((0, len(pos), 2))
    return MobilityResult(contacts, membership, positions)
