"""Group membership over time and the three anycast delivery models.

Membership of a node in a group is a sorted list of half-open intervals
``[join, leave)``; the last interval may be open (``leave is None``) while the
node is still a member.
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set, Tuple

from .core import (
    Current,
    GroupId,
    NodeId,
    SemanticsSpec,
    SimTime,
    TemporalInterval,
    TemporalPoint,
)


class MembershipError(ValueError):
    pass


class DoubleJoin(MembershipError):
    pass


class LeaveWithoutJoin(MembershipError):
    pass


class OutOfOrder(MembershipError):
    pass


class InvalidInterval(ValueError):
    pass


class MembershipKind(enum.Enum):
    JOIN = "J"
    LEAVE = "L"


@dataclass(frozen=True, order=True)
class MembershipEvent:
    at: SimTime
    node: NodeId
    group: GroupId
    kind: MembershipKind


def join(node: NodeId, group: GroupId, at: SimTime) -> MembershipEvent:
    return MembershipEvent(at, node, group, MembershipKind.JOIN)


def leave(node: NodeId, group: GroupId, at: SimTime) -> MembershipEvent:
    return MembershipEvent(at, node, group, MembershipKind.LEAVE)


@dataclass
class _Track:
    joins: List[SimTime] = field(default_factory=list)
    leaves: List[Optional[SimTime]] = field(default_factory=list)
    last_event: SimTime = -1

    @property
    def open(self) -> bool:
        return bool(self.leaves) and self.leaves[-1] is None


class MembershipHistory:
    """Append-only record of join/leave intervals per (node, group)."""

    def __init__(self):
        self._tracks: Dict[Tuple[NodeId, GroupId], _Track] = {}
        self._groups_of: Dict[NodeId, Set[GroupId]] = {}
        self._members: Dict[GroupId, Set[NodeId]] = {}
        self.last_event_time: SimTime = -1

    def intervals(self, node: NodeId, group: GroupId) -> List[Tuple[SimTime, Optional[SimTime]]]:
        tr = self._tracks.get((node, group))
        if tr is None:
            return []
        return list(zip(tr.joins, tr.leaves))

    def pairs(self) -> List[Tuple[NodeId, GroupId]]:
        return sorted(self._tracks)

    def current_groups(self, node: NodeId) -> Set[GroupId]:
        """Groups ``node`` is a member of after the latest applied event."""
        return set(self._groups_of.get(node, ()))

    def current_members(self, group: GroupId) -> Set[NodeId]:
        return set(self._members.get(group, ()))

    def apply(self, e: MembershipEvent) -> "MembershipHistory":
        key = (e.node, e.group)
        tr = self._tracks.get(key)
        if tr is not None and e.at < tr.last_event:
            raise OutOfOrder(
                f"event at {e.at} precedes last event {tr.last_event} for node {e.node} group {e.group}"
            )
        if e.kind is MembershipKind.JOIN:
            if tr is None:
                tr = self._tracks[key] = _Track()
            if tr.open:
                raise DoubleJoin(f"node {e.node} already in group {e.group} (join at {e.at})")
            tr.joins.append(e.at)
            tr.leaves.append(None)
            self._groups_of.setdefault(e.node, set()).add(e.group)
            self._members.setdefault(e.group, set()).add(e.node)
        else:
            if tr is None or not tr.open:
                raise LeaveWithoutJoin(f"node {e.node} not in group {e.group} (leave at {e.at})")
            if tr.joins[-1] == e.at:
                # zero-length membership contains no instant; drop it
                tr.joins.pop()
                tr.leaves.pop()
            else:
                tr.leaves[-1] = e.at
            self._groups_of[e.node].discard(e.group)
            self._members[e.group].discard(e.node)
        tr.last_event = e.at
        self.last_event_time = max(self.last_event_time, e.at)
        return self

    def is_member_at(self, node: NodeId, group: GroupId, t: SimTime) -> bool:
        tr = self._tracks.get((node, group))
        if tr is None:
            return False
        i = bisect.bisect_right(tr.joins, t) - 1
        if i < 0:
            return False
        lv = tr.leaves[i]
        return lv is None or t < lv

    def member_during(self, node: NodeId, group: GroupId, t1: SimTime, t2: SimTime) -> bool:
        if t1 > t2:
            raise InvalidInterval(f"t1={t1} > t2={t2}")
        tr = self._tracks.get((node, group))
        if tr is None:
            return False
        # last interval starting at or before t2 is the only candidate that can
        # overlap [t1, t2], since intervals are disjoint and sorted
        i = bisect.bisect_right(tr.joins, t2) - 1
        if i < 0:
            return False
        lv = tr.leaves[i]
        return lv is None or lv > t1


def apply_membership_event(h: MembershipHistory, e: MembershipEvent) -> MembershipHistory:
    return h.apply(e)


def history_from_events(events: Iterable[MembershipEvent]) -> MembershipHistory:
    h = MembershipHistory()
    for e in events:
        h.apply(e)
    return h


def is_member_at(h: MembershipHistory, node: NodeId, group: GroupId, t: SimTime) -> bool:
    return h.is_member_at(node, group, t)


def member_during(
    h: MembershipHistory, node: NodeId, group: GroupId, t1: SimTime, t2: SimTime
) -> bool:
    return h.member_during(node, group, t1, t2)


def valid_receiver(
    spec: SemanticsSpec,
    h: MembershipHistory,
    node: NodeId,
    group: GroupId,
    t_delivery: SimTime,
) -> bool:
    """Whether ``node`` may accept a message for ``group`` at ``t_delivery``.

    Only membership up to ``t_delivery`` is consulted: a temporal point in the
    future is not valid yet, and an interval is judged on its elapsed part.
    """
    if isinstance(spec, Current):
        return h.is_member_at(node, group, t_delivery)
    if isinstance(spec, TemporalInterval):
        hi = min(spec.t_end, t_delivery)
        if hi < spec.t_start:
            return False
        return h.member_during(node, group, spec.t_start, hi)
    if isinstance(spec, TemporalPoint):
        if spec.t_point > t_delivery:
            return False
        return h.is_member_at(node, group, spec.t_point)
    raise TypeError(f"unknown semantics spec {spec!r}")


def eligible_receivers(
    spec: SemanticsSpec,
    h: MembershipHistory,
    group: GroupId,
    t: SimTime,
    all_nodes: Iterable[NodeId],
) -> Set[NodeId]:
    return {n for n in all_nodes if valid_receiver(spec, h, n, group, t)}


def earliest_validity(spec: SemanticsSpec, t: SimTime) -> Optional[SimTime]:
    """Earliest future instant at which the delivery model itself can start to hold.

    Returns None when nothing about the model changes after ``t`` without a
    membership change.
    """
    if isinstance(spec, TemporalPoint) and spec.t_point > t:
        return spec.t_point
    if isinstance(spec, TemporalInterval) and spec.t_start > t:
        return spec.t_start
    return None


class ScriptParseError(ValueError):
    def __init__(self, line_no: int, msg: str):
        super().__init__(f"line {line_no}: {msg}")
        self.line_no = line_no


def load_membership_script(text: str) -> List[MembershipEvent]:
    """Parse ``time_ms,node,group,J|L`` lines (``#`` starts a comment line).

    The events are replayed into a scratch history so illegal sequences fail
    here, with the offending line number.
    """
    events = []
    scratch = MembershipHistory()
    last = -1
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise ScriptParseError(no, f"expected 4 fields, got {len(parts)}")
        try:
            at, node, group = (int(x) for x in parts[:3])
            kind = MembershipKind(parts[3])
        except ValueError:
            raise ScriptParseError(no, f"malformed event {line!r}") from None
        if min(at, node, group) < 0:
            raise ScriptParseError(no, "time, node and group must be non-negative")
        if at < last:
            raise ScriptParseError(no, f"time {at} precedes {last}")
        last = at
        e = MembershipEvent(at, node, group, kind)
        try:
            scratch.apply(e)
        except MembershipError as exc:
            raise ScriptParseError(no, str(exc)) from None
        events.append(e)
    return events


def save_membership_script(events: Iterable[MembershipEvent]) -> str:
    return "".join(f"{e.at},{e.node},{e.group},{e.kind.value}\n" for e in events)
