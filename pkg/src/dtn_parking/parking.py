"""Parking areas: slot inventories, fares, and bookings held with expiry."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Tuple

from .core import BookingId, GroupId, MessageId, NodeId, SimTime


class UnknownBooking(KeyError):
    pass


class VehicleCategory(enum.Enum):
    TWO_WHEELER = "two_wheeler"
    CAR = "car"
    HEAVY_VEHICLE = "heavy_vehicle"


CATEGORIES: Tuple[VehicleCategory, ...] = tuple(VehicleCategory)


@dataclass
class CategorySlots:
    capacity: int
    fare: float  # currency units per hour
    booked: int = 0

    def __post_init__(self):
        if self.capacity < 0:
            raise ValueError("capacity must be non-negative")
        if self.fare < 0:
            raise ValueError("fare must be non-negative")
        if not 0 <= self.booked <= self.capacity:
            raise ValueError("booked must lie in [0, capacity]")

    @property
    def free(self) -> int:
        return self.capacity - self.booked


class SlotInventory(dict):
    """Mapping VehicleCategory -> CategorySlots; missing categories have no slots."""

    @classmethod
    def uniform(cls, capacity: int, fares: Mapping[VehicleCategory, float]) -> "SlotInventory":
        return cls({c: CategorySlots(capacity, fares.get(c, 0.0)) for c in CATEGORIES})

    def slots(self, category: VehicleCategory) -> CategorySlots:
        s = self.get(category)
        if s is None:
            s = self[category] = CategorySlots(0, 0.0)
        return s


@dataclass(frozen=True)
class Booking:
    vehicle: NodeId
    category: VehicleCategory
    hold_expiry: SimTime


@dataclass(frozen=True)
class BookingAck:
    booking_id: Optional[BookingId] = None
    reject_reason: Optional[str] = None

    @property
    def accepted(self) -> bool:
        return self.booking_id is not None


@dataclass
class ParkingServer:
    node: NodeId
    area_group: GroupId
    inventory: SlotInventory
    bookings: Dict[BookingId, Booking] = field(default_factory=dict)
    new_booking_id: Callable[[], BookingId] = field(
        default_factory=lambda: itertools.count().__next__, repr=False
    )

    def live_count(self, category: VehicleCategory) -> int:
        return sum(1 for b in self.bookings.values() if b.category is category)


@dataclass(frozen=True)
class RequestPayload:
    category: VehicleCategory


@dataclass(frozen=True)
class ReplyPayload:
    area_group: GroupId
    server: NodeId
    vacancy: Tuple[Tuple[VehicleCategory, int, float], ...]  # (category, free, fare)

    def free(self, category: VehicleCategory) -> int:
        for c, free, _ in self.vacancy:
            if c is category:
                return free
        return 0


@dataclass(frozen=True)
class BookingPayload:
    category: VehicleCategory
    request: MessageId
    area_group: GroupId


@dataclass(frozen=True)
class AckPayload:
    ack: BookingAck
    area_group: GroupId
    server: NodeId
    category: VehicleCategory


def query_vacancy(s: ParkingServer, category: VehicleCategory) -> Tuple[int, float]:
    slots = s.inventory.get(category)
    if slots is None:
        return 0, 0.0
    return slots.free, slots.fare


def vacancy_snapshot(s: ParkingServer) -> Tuple[Tuple[VehicleCategory, int, float], ...]:
    return tuple((c, *query_vacancy(s, c)) for c in CATEGORIES)


def reserve_slot(
    s: ParkingServer,
    category: VehicleCategory,
    vehicle: NodeId,
    now: SimTime,
    hold_duration: int,
) -> BookingAck:
    """Hold a slot for ``vehicle``; repeated requests return the live booking."""
    for bid, b in s.bookings.items():
        if b.vehicle == vehicle and b.category is category:
            return BookingAck(booking_id=bid)
    slots = s.inventory.slots(category)
    if slots.free <= 0:
        return BookingAck(reject_reason="Full")
    slots.booked += 1
    bid = s.new_booking_id()
    s.bookings[bid] = Booking(vehicle, category, now + hold_duration)
    return BookingAck(booking_id=bid)


def release_slot(s: ParkingServer, booking: BookingId) -> BookingId:
    b = s.bookings.pop(booking, None)
    if b is None:
        raise UnknownBooking(booking)
    s.inventory.slots(b.category).booked -= 1
    return booking


def expire_holds(s: ParkingServer, now: SimTime) -> List[BookingId]:
    """Release every booking whose hold ran out (a hold is valid through its expiry instant)."""
    gone = sorted(bid for bid, b in s.bookings.items() if b.hold_expiry < now)
    for bid in gone:
        release_slot(s, bid)
    return gone


def check_server(s: ParkingServer) -> None:
    """Assert the capacity/booking bookkeeping invariants."""
    for c, slots in s.inventory.items():
        if not 0 <= slots.booked <= slots.capacity:
            raise AssertionError(f"server {s.node} {c.value}: booked={slots.booked} cap={slots.capacity}")
        live = s.live_count(c)
        if live != slots.booked:
            raise AssertionError(f"server {s.node} {c.value}: booked={slots.booked} live={live}")
