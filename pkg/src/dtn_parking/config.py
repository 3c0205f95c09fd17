"""Scenario configuration: a single JSON object, validated strictly.

Unknown keys are rejected at every level and every default is filled in, so
``dump_config(parse_config(text))`` is the normalised echo of a document.
``build_scenario`` turns a validated config plus a seed into an engine
``Scenario`` (mobility, membership and workload precomputed).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

import pydantic
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .aco import AcoParams
from .baselines import GaParams
from .core import Current, MessageKind, SemanticsSpec, TemporalInterval, TemporalPoint
from .engine import DEFAULT_SIZES, RequestSpec, RouterKind, RunConfig, Scenario
from .membership import load_membership_script
from .mobility import Arena, MobilityParams, Region, load_contact_trace, simulate_mobility
from .parking import CATEGORIES, CategorySlots, ParkingServer, SlotInventory, VehicleCategory
from .rng import Rng


class ConfigError(Exception):
    pass


class ParseError(ConfigError):
    pass


class UnknownKey(ConfigError):
    def __init__(self, path: str):
        super().__init__(f"unknown key: {path}")
        self.path = path


class ValidationError(ConfigError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


CategoryName = Literal["two_wheeler", "car", "heavy_vehicle"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ArenaConfig(_Strict):
    width: float = Field(1000.0, gt=0)
    height: float = Field(1000.0, gt=0)


class NodesConfig(_Strict):
    vehicles: int = Field(50, ge=0)
    v_min: float = Field(5.0, gt=0)
    v_max: float = Field(15.0, gt=0)
    pause_max_ms: int = Field(10_000, ge=0)
    radio_range: float = Field(100.0, gt=0)

    @model_validator(mode="after")
    def _speeds(self):
        if self.v_min > self.v_max:
            raise ValueError("v_min must not exceed v_max")
        return self


class AreaConfig(_Strict):
    group: int = Field(ge=0)
    rect: Tuple[float, float, float, float]

    @model_validator(mode="after")
    def _rect(self):
        x0, y0, x1, y1 = self.rect
        if not (x0 < x1 and y0 < y1):
            raise ValueError("rect must satisfy x0 < x1 and y0 < y1")
        return self


class CategoryConfig(_Strict):
    capacity: int = Field(5, ge=0)
    fare: float = Field(ge=0)


DEFAULT_FARES = {"two_wheeler": 10.0, "car": 20.0, "heavy_vehicle": 50.0}


def _default_inventory() -> Dict[str, CategoryConfig]:
    return {k: CategoryConfig(capacity=5, fare=v) for k, v in DEFAULT_FARES.items()}


class ServerConfig(_Strict):
    name: Optional[str] = None
    area: int = Field(ge=0)
    position: Tuple[float, float]
    inventory: Dict[CategoryName, CategoryConfig] = Field(default_factory=_default_inventory)


class SemanticsConfig(_Strict):
    """Per-request delivery model; offsets are relative to the request's creation time."""

    model: Literal["current", "temporal_interval", "temporal_point"] = "current"
    start_offset_ms: int = Field(0, ge=0)
    end_offset_ms: int = Field(0, ge=0)
    point_offset_ms: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _order(self):
        if self.model == "temporal_interval" and self.start_offset_ms > self.end_offset_ms:
            raise ValueError("start_offset_ms must not exceed end_offset_ms")
        return self

    def spec_at(self, t: int) -> SemanticsSpec:
        if self.model == "current":
            return Current()
        if self.model == "temporal_interval":
            return TemporalInterval(t + self.start_offset_ms, t + self.end_offset_ms)
        return TemporalPoint(t + self.point_offset_ms)


class WorkloadConfig(_Strict):
    request_interval_ms: int = Field(300_000, gt=0)  # mean gap between a vehicle's requests
    category_mix: Dict[CategoryName, float] = Field(
        default_factory=lambda: {"two_wheeler": 0.3, "car": 0.6, "heavy_vehicle": 0.1}
    )
    semantics: SemanticsConfig = Field(default_factory=SemanticsConfig)
    ttl_ms: int = Field(300_000, gt=0)
    hold_duration_ms: int = Field(600_000, ge=0)

    @model_validator(mode="after")
    def _mix(self):
        if any(v < 0 for v in self.category_mix.values()) or sum(self.category_mix.values()) <= 0:
            raise ValueError("category_mix weights must be non-negative with a positive sum")
        return self


class AcoConfig(_Strict):
    alpha: float = Field(1.0, ge=0)
    beta: float = Field(0.0, ge=0)
    rho: float = Field(0.1, gt=0, le=1)
    q: float = Field(1.0, gt=0)
    tau0: float = Field(0.1, gt=0)
    evap_interval_ms: int = Field(30_000, gt=0)
    floor_eps: float = Field(1e-6, ge=0)
    hop_limit: int = Field(8, ge=1)

    def params(self) -> AcoParams:
        return AcoParams(self.alpha, self.beta, self.rho, self.q, self.tau0,
                         self.evap_interval_ms, self.floor_eps, self.hop_limit)


class GaConfig(_Strict):
    population_size: int = Field(50, ge=1)
    generations: int = Field(200, ge=0)
    crossover_prob: float = Field(0.9, ge=0, le=1)
    mutation_prob_per_bit: float = Field(0.01, ge=0, le=1)
    tournament_size: int = Field(2, ge=2)
    elitism: int = Field(1, ge=0)
    genes: int = Field(8, ge=1)
    bits_per_gene: int = Field(8, ge=1)

    @model_validator(mode="after")
    def _elitism(self):
        if self.elitism > self.population_size:
            raise ValueError("elitism must not exceed population_size")
        return self

    def params(self) -> GaParams:
        return GaParams(**self.model_dump())


class RouterConfig(_Strict):
    kind: Literal["aco", "epidemic", "ga"] = "aco"
    aco: AcoConfig = Field(default_factory=AcoConfig)
    ga: GaConfig = Field(default_factory=GaConfig)
    reroute_wait_ms: int = Field(30_000, ge=0)
    heuristic: Literal["none", "contact_recency"] = "none"


class MessageSizes(_Strict):
    request: int = Field(DEFAULT_SIZES[MessageKind.PARKING_REQUEST], ge=0)
    reply: int = Field(DEFAULT_SIZES[MessageKind.PARKING_REPLY], ge=0)
    booking: int = Field(DEFAULT_SIZES[MessageKind.BOOKING_REQUEST], ge=0)
    ack: int = Field(DEFAULT_SIZES[MessageKind.BOOKING_ACK], ge=0)


class EngineConfig(_Strict):
    duration_ms: int = Field(600_000, gt=0)
    movement_dt_ms: int = Field(1000, gt=0)
    per_hop_latency_ms: int = Field(10, ge=0)
    bandwidth_bytes_per_s: Optional[int] = Field(None, gt=0)  # null = unlimited
    message_sizes: MessageSizes = Field(default_factory=MessageSizes)
    seeds: List[int] = Field(default_factory=lambda: [1], min_length=1)

    @model_validator(mode="after")
    def _seeds(self):
        if any(not 0 <= s < 2**64 for s in self.seeds):
            raise ValueError("seeds must be 64-bit unsigned integers")
        return self


class TraceConfig(_Strict):
    membership_script: Optional[str] = None
    contact_trace: Optional[str] = None


def _default_areas() -> List[AreaConfig]:
    return [
        AreaConfig(group=0, rect=(100.0, 100.0, 300.0, 300.0)),
        AreaConfig(group=1, rect=(700.0, 700.0, 900.0, 900.0)),
    ]


def _default_servers() -> List[ServerConfig]:
    return [
        ServerConfig(name="area0", area=0, position=(200.0, 200.0)),
        ServerConfig(name="area1", area=1, position=(800.0, 800.0)),
    ]


class ScenarioConfig(_Strict):
    name: str = "default"
    arena: ArenaConfig = Field(default_factory=ArenaConfig)
    nodes: NodesConfig = Field(default_factory=NodesConfig)
    areas: List[AreaConfig] = Field(default_factory=_default_areas)
    servers: List[ServerConfig] = Field(default_factory=_default_servers)
    workload: WorkloadConfig = Field(default_factory=WorkloadConfig)
    router: RouterConfig = Field(default_factory=RouterConfig)
    engine: EngineConfig = Field(default_factory=EngineConfig)
    trace: TraceConfig = Field(default_factory=TraceConfig)


def _loc(loc) -> str:
    out = ""
    for part in loc:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def _check_semantics(cfg: ScenarioConfig) -> None:
    groups = {a.group for a in cfg.areas}
    if not groups:
        raise ValidationError("areas", "at least one area is required")
    regions = [Region(a.group, a.rect) for a in cfg.areas]
    for i, a in enumerate(regions):
        for j in range(i + 1, len(regions)):
            b = regions[j]
            if a.group == b.group and a.overlaps(b):
                raise ValidationError(f"areas[{j}]", f"overlaps another rect of group {a.group}")
    for i, a in enumerate(cfg.areas):
        x0, y0, x1, y1 = a.rect
        if x0 < 0 or y0 < 0 or x1 > cfg.arena.width or y1 > cfg.arena.height:
            raise ValidationError(f"areas[{i}]", "rect lies outside the arena")
    for i, s in enumerate(cfg.servers):
        label = f"servers[{i}]" + (f" ({s.name})" if s.name else "")
        if s.area not in groups:
            raise ValidationError(label, f"references unknown area group {s.area}")
        x, y = s.position
        if not any(r.group == s.area and r.contains(x, y) for r in regions):
            raise ValidationError(label, f"position {s.position} is outside its area {s.area}")
    if not cfg.servers:
        raise ValidationError("servers", "at least one server is required")


def parse_config(text: str) -> ScenarioConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError("config must be a JSON object")
    try:
        cfg = ScenarioConfig.model_validate(doc)
    except pydantic.ValidationError as exc:
        errs = exc.errors()
        for e in errs:
            if e["type"] == "extra_forbidden":
                raise UnknownKey(_loc(e["loc"])) from None
        e = errs[0]
        raise ValidationError(_loc(e["loc"]), e["msg"]) from None
    _check_semantics(cfg)
    return cfg


def load_config(path) -> ScenarioConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def dump_config(cfg: ScenarioConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def _sizes(cfg: ScenarioConfig) -> Dict[MessageKind, int]:
    s = cfg.engine.message_sizes
    return {
        MessageKind.PARKING_REQUEST: s.request,
        MessageKind.PARKING_REPLY: s.reply,
        MessageKind.BOOKING_REQUEST: s.booking,
        MessageKind.BOOKING_ACK: s.ack,
    }


def run_config(cfg: ScenarioConfig, seed: int) -> RunConfig:
    e = cfg.engine
    return RunConfig(
        seed=seed,
        duration=e.duration_ms,
        movement_dt=e.movement_dt_ms,
        evap_interval=cfg.router.aco.evap_interval_ms,
        per_hop_latency=e.per_hop_latency_ms,
        bandwidth=e.bandwidth_bytes_per_s,
        message_sizes=_sizes(cfg),
    )


def _pick(weights: List[float], u: float) -> int:
    total = sum(weights)
    acc = 0.0
    for i, w in enumerate(weights):
        acc += w / total
        if u < acc:
            return i
    return len(weights) - 1


class TraceFileError(ConfigError):
    pass


def _load_trace_file(path: Path, loader):
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise TraceFileError(f"{path}: {exc.strerror or exc}") from None
    try:
        return loader(text)
    except ValueError as exc:
        raise TraceFileError(f"{path}: {exc}") from None


def build_scenario(cfg: ScenarioConfig, seed: int, base_dir: Optional[Path] = None) -> Tuple[Scenario, RunConfig]:
    """Precompute mobility, membership and workload for one seed.

    Vehicles are nodes ``0..vehicles-1``; servers follow in config order.
    Trace paths are resolved against ``base_dir``.
    """
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    n_veh = cfg.nodes.vehicles
    n = n_veh + len(cfg.servers)
    rngs = [Rng.for_node(seed, i) for i in range(n)]
    regions = [Region(a.group, a.rect) for a in cfg.areas]
    mob = simulate_mobility(
        n_veh,
        [s.position for s in cfg.servers],
        Arena(cfg.arena.width, cfg.arena.height),
        MobilityParams(cfg.nodes.v_min, cfg.nodes.v_max, cfg.nodes.pause_max_ms),
        cfg.nodes.radio_range,
        regions,
        cfg.engine.duration_ms,
        cfg.engine.movement_dt_ms,
        rngs,
    )
    contacts, membership = mob.contacts, mob.membership
    if cfg.trace.contact_trace:
        contacts = _load_trace_file(base / cfg.trace.contact_trace, load_contact_trace)
    if cfg.trace.membership_script:
        membership = _load_trace_file(base / cfg.trace.membership_script, load_membership_script)

    servers = []
    for i, s in enumerate(cfg.servers):
        inv = SlotInventory()
        for c in CATEGORIES:
            cc = s.inventory.get(c.value)
            inv[c] = CategorySlots(cc.capacity, cc.fare) if cc else CategorySlots(0, 0.0)
        servers.append(ParkingServer(n_veh + i, s.area, inv))

    groups = sorted({a.group for a in cfg.areas})
    mix_names = [c for c in CATEGORIES if cfg.workload.category_mix.get(c.value, 0.0) > 0]
    mix_w = [cfg.workload.category_mix[c.value] for c in mix_names]
    rate = 1.0 / cfg.workload.request_interval_ms
    requests = []
    for v in range(n_veh):
        r = rngs[v]
        t = r.expovariate(rate)
        while t <= cfg.engine.duration_ms:
            at = int(t)
            cat = mix_names[_pick(mix_w, r.random())]
            grp = groups[r.randbelow(len(groups))]
            requests.append(RequestSpec(at, v, grp, cat, cfg.workload.semantics.spec_at(at)))
            t += r.expovariate(rate)

    rc = cfg.router
    scenario = Scenario(
        name=cfg.name,
        num_nodes=n,
        servers=servers,
        contacts=contacts,
        membership=membership,
        requests=requests,
        router=RouterKind(rc.kind),
        aco=rc.aco.params(),
        ga=rc.ga.params(),
        ttl=cfg.workload.ttl_ms,
        hold_duration=cfg.workload.hold_duration_ms,
        reroute_wait=rc.reroute_wait_ms,
        heuristic=rc.heuristic,
        rng_states=[r.state for r in rngs],
    )
    return scenario, run_config(cfg, seed)


def bundled_config(name: str = "default") -> ScenarioConfig:
    from importlib import resources

    text = resources.files("dtn_parking").joinpath("scenarios").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return parse_config(text)
