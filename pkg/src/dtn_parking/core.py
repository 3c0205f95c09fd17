"""Shared simulation types: time, identifiers, semantics specs and messages.

Time is integer milliseconds since simulation start. Identifiers are plain
non-negative ints; ``IdAllocator`` hands out fresh ones per run.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field, replace
from typing import Any, Iterator, Optional, Tuple, Union

SimTime = int
NodeId = int
GroupId = int
MessageId = int
BookingId = int


class InvalidSemantics(ValueError):
    pass


class InvalidTtl(ValueError):
    pass


class InvalidHopLimit(ValueError):
    pass


@dataclass(frozen=True)
class Current:
    """Receiver must be a group member at the instant of delivery."""


@dataclass(frozen=True)
class TemporalInterval:
    """Receiver must have been a member at least once within [t_start, t_end]."""

    t_start: SimTime
    t_end: SimTime

    def __post_init__(self):
        if self.t_start < 0 or self.t_end < 0:
            raise InvalidSemantics("interval bounds must be non-negative")
        if self.t_start > self.t_end:
            raise InvalidSemantics(
                f"reversed interval: t_start={self.t_start} > t_end={self.t_end}"
            )


@dataclass(frozen=True)
class TemporalPoint:
    """Receiver must have been a member at the instant ``t_point``."""

    t_point: SimTime

    def __post_init__(self):
        if self.t_point < 0:
            raise InvalidSemantics("t_point must be non-negative")


SemanticsSpec = Union[Current, TemporalInterval, TemporalPoint]


class MessageKind(enum.Enum):
    PARKING_REQUEST = "request"
    PARKING_REPLY = "reply"
    BOOKING_REQUEST = "booking"
    BOOKING_ACK = "ack"

    @property
    def is_anycast(self) -> bool:
        return self is MessageKind.PARKING_REQUEST


@dataclass(frozen=True)
class Message:
    """A request/reply/booking unit.

    ``path`` lists the nodes this replica traversed, source first. Unicast
    kinds carry ``dest_node``; backward messages (replies and acks) carry the
    ``route`` they retrace, i.e. the recorded path of the message they answer.
    """

    id: MessageId
    kind: MessageKind
    source: NodeId
    dest_group: GroupId
    semantics: SemanticsSpec
    created: SimTime
    ttl: int
    hop_limit: int
    path: Tuple[NodeId, ...]
    payload: Any = None
    dest_node: Optional[NodeId] = None
    route: Tuple[NodeId, ...] = ()
    in_reply_to: Optional[MessageId] = None

    @property
    def hops(self) -> int:
        return len(self.path) - 1

    @property
    def holder(self) -> NodeId:
        return self.path[-1]

    def extended(self, node: NodeId) -> "Message":
        """Replica of this message after being carried to ``node``."""
        if node in self.path:
            raise ValueError(f"node {node} already on path {self.path}")
        return replace(self, path=self.path + (node,))

    @property
    def expires_at(self) -> SimTime:
        # last instant at which the message is still deliverable
        return self.created + self.ttl


@dataclass(frozen=True)
class DeliveryRecord:
    message: MessageId
    receiver: NodeId
    at: SimTime
    semantics_valid: bool


@dataclass
class IdAllocator:
    """Per-run source of strictly increasing ids."""

    start: int = 0
    _counter: Iterator[int] = field(init=False, repr=False)

    def __post_init__(self):
        self._counter = itertools.count(self.start)

    def __call__(self) -> int:
        return next(self._counter)


_default_ids = IdAllocator()


def validate_semantics(spec: SemanticsSpec) -> SemanticsSpec:
    if isinstance(spec, (Current, TemporalPoint)):
        return spec
    if isinstance(spec, TemporalInterval):
        if spec.t_start > spec.t_end:
            raise InvalidSemantics("reversed interval")
        return spec
    raise InvalidSemantics(f"unknown semantics spec {spec!r}")


def make_message(
    kind: MessageKind,
    source: NodeId,
    dest_group: GroupId,
    semantics: SemanticsSpec,
    now: SimTime,
    ttl: int,
    hop_limit: int,
    payload: Any = None,
    *,
    ids: Optional[IdAllocator] = None,
    dest_node: Optional[NodeId] = None,
    route: Tuple[NodeId, ...] = (),
    in_reply_to: Optional[MessageId] = None,
) -> Message:
    """Create a fresh message at ``source`` with ``path == (source,)``."""
    validate_semantics(semantics)
    if ttl <= 0:
        raise InvalidTtl(f"ttl must be positive, got {ttl}")
    if hop_limit < 1:
        raise InvalidHopLimit(f"hop_limit must be >= 1, got {hop_limit}")
    if now < 0:
        raise ValueError("now must be non-negative")
    alloc = ids if ids is not None else _default_ids
    return Message(
        id=alloc(),
        kind=kind,
        source=source,
        dest_group=dest_group,
        semantics=semantics,
        created=now,
        ttl=ttl,
        hop_limit=hop_limit,
        path=(source,),
        payload=payload,
        dest_node=dest_node,
        route=tuple(route),
        in_reply_to=in_reply_to,
    )


def message_expired(m: Message, now: SimTime) -> bool:
    # deliverable up to and including created + ttl
    return now > m.created + m.ttl
