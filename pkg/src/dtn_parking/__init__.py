"""Delay-tolerant smart-parking simulator with ACO, epidemic and GA routing."""

from .aco import AcoParams, PheromoneTable, RouterState, forward_probabilities, route_booking, select_next_hop
from .baselines import Contact, ContactPlan, GaParams, decode_path, epidemic_forward, ga_route
from .config import ScenarioConfig, build_scenario, bundled_config, dump_config, load_config, parse_config
from .core import Current, Message, MessageKind, TemporalInterval, TemporalPoint, make_message
from .engine import EventKind, EventQueue, RouterKind, RunConfig, Scenario, metrics_document, run_simulation
from .membership import MembershipEvent, MembershipHistory, valid_receiver
from .parking import ParkingServer, SlotInventory, VehicleCategory, reserve_slot
from .rng import Rng

__version__ = "0.1.0"

__all__ = [
    "AcoParams", "PheromoneTable", "RouterState", "forward_probabilities", "route_booking",
    "select_next_hop", "Contact", "ContactPlan", "GaParams", "decode_path", "epidemic_forward",
    "ga_route", "ScenarioConfig", "build_scenario", "bundled_config", "dump_config", "load_config",
    "parse_config", "Current", "Message", "MessageKind", "TemporalInterval", "TemporalPoint",
    "make_message", "EventKind", "EventQueue", "RouterKind", "RunConfig", "Scenario",
    "metrics_document", "run_simulation", "MembershipEvent", "MembershipHistory",
    "valid_receiver", "ParkingServer", "SlotInventory", "VehicleCategory", "reserve_slot", "Rng",
]
