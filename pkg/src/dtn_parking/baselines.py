"""Baseline routers: epidemic flooding and a genetic-algorithm route decider.

The GA router is an offline baseline. It sees the full contact plan and
searches over binary chromosomes; each gene picks the next contact to take
from the current node, so a chromosome decodes to a time-respecting walk.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .aco import Decision, RouterState
from .core import GroupId, Message, MessageId, NodeId, SemanticsSpec, SimTime, message_expired
from .membership import MembershipHistory, valid_receiver
from .rng import Rng


class SizeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class GaParams:
    population_size: int = 50
    generations: int = 200
    crossover_prob: float = 0.9
    mutation_prob_per_bit: float = 0.01
    tournament_size: int = 2
    elitism: int = 1
    genes: int = 8
    bits_per_gene: int = 8

    def __post_init__(self):
        if self.population_size < 1:
            raise ValueError("population_size must be >= 1")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ValueError("crossover_prob must be in [0, 1]")
        if not 0.0 <= self.mutation_prob_per_bit <= 1.0:
            raise ValueError("mutation_prob_per_bit must be in [0, 1]")
        if self.tournament_size < 2:
            raise ValueError("tournament_size must be >= 2")
        # elitism == population_size is the identity configuration
        if not 0 <= self.elitism <= self.population_size:
            raise ValueError("elitism must be in [0, population_size]")
        if self.genes < 1 or self.bits_per_gene < 1:
            raise ValueError("genes and bits_per_gene must be >= 1")

    @property
    def length(self) -> int:
        return self.genes * self.bits_per_gene


@dataclass(frozen=True)
class Contact:
    a: NodeId
    b: NodeId
    start: SimTime
    end: SimTime

    def __post_init__(self):
        if self.start >= self.end:
            raise ValueError(f"contact window must satisfy start < end: {self}")
        if self.a == self.b:
            raise ValueError("a contact joins two distinct nodes")


class ContactPlan:
    """Known contact windows ``[start, end)`` between node pairs."""

    def __init__(self, contacts: Iterable[Contact] = ()):
        self.contacts: List[Contact] = sorted(
            contacts, key=lambda c: (c.start, min(c.a, c.b), max(c.a, c.b), c.end)
        )
        self._by_node: Dict[NodeId, List[Tuple[NodeId, SimTime, SimTime]]] = {}
        for c in self.contacts:
            self._by_node.setdefault(c.a, []).append((c.b, c.start, c.end))
            self._by_node.setdefault(c.b, []).append((c.a, c.start, c.end))

    def __len__(self):
        return len(self.contacts)

    def nodes(self) -> List[NodeId]:
        return sorted(self._by_node)

    def feasible(
        self, node: NodeId, t: SimTime, exclude: Iterable[NodeId] = ()
    ) -> List[Tuple[SimTime, NodeId]]:
        """Contacts usable from ``node`` at or after ``t``, as (arrival, peer).

        Ordered by arrival time, then peer id, then window.
        """
        excl = set(exclude)
        opts = [
            (max(s, t), other, s, e)
            for other, s, e in self._by_node.get(node, ())
            if e > t and other not in excl
        ]
        opts.sort()
        return [(arr, other) for arr, other, _, _ in opts]

    def window(self, t0: SimTime, t1: SimTime) -> "ContactPlan":
        """Contacts clipped to [t0, t1]."""
        kept = []
        for c in self.contacts:
            s, e = max(c.start, t0), min(c.end, t1 + 1)
            if s < e:
                kept.append(Contact(c.a, c.b, s, e))
        return ContactPlan(kept)


def gene_values(bits: np.ndarray, bits_per_gene: int) -> List[int]:
    n = len(bits) // bits_per_gene
    weights = 1 << np.arange(bits_per_gene - 1, -1, -1, dtype=np.int64)
    g = np.asarray(bits[: n * bits_per_gene], dtype=np.int64).reshape(n, bits_per_gene)
    return [int(v) for v in g @ weights]


def decode_path(
    c: np.ndarray,
    plan: ContactPlan,
    source: NodeId,
    t0: SimTime,
    bits_per_gene: int = 8,
) -> List[Tuple[NodeId, SimTime]]:
    """Walk the plan: each gene, modulo the number of feasible next contacts,
    picks the next hop. Visited nodes are never revisited."""
    walk = [(source, t0)]
    visited = {source}
    node, t = source, t0
    for g in gene_values(c, bits_per_gene):
        opts = plan.feasible(node, t, exclude=visited)
        if not opts:
            break
        t, node = opts[g % len(opts)]
        walk.append((node, t))
        visited.add(node)
    return walk


def delay_fitness(delay: SimTime) -> float:
    return 1000.0 / (1.0 + delay / 1000.0)


def walk_fitness(
    walk: Sequence[Tuple[NodeId, SimTime]],
    t0: SimTime,
    group: GroupId,
    history: MembershipHistory,
    spec: SemanticsSpec,
    ttl: int,
) -> Tuple[float, Optional[int]]:
    """Fitness of a decoded walk plus the index of its earliest valid delivery."""
    best_t, best_i = None, None
    for i, (n, t) in enumerate(walk):
        if t > t0 + ttl:
            continue
        if valid_receiver(spec, history, n, group, t) and (best_t is None or t < best_t):
            best_t, best_i = t, i
    if best_t is None:
        return 0.0, None
    return delay_fitness(best_t - t0), best_i


def ga_fitness(
    c: np.ndarray,
    plan: ContactPlan,
    source: NodeId,
    t0: SimTime,
    group: GroupId,
    history: MembershipHistory,
    spec: SemanticsSpec,
    ttl: int,
    bits_per_gene: int = 8,
) -> float:
    walk = decode_path(c, plan, source, t0, bits_per_gene)
    return walk_fitness(walk, t0, group, history, spec, ttl)[0]


def _draw_indices(rng: Rng, n: int, upper: int) -> np.ndarray:
    u = rng.random_array(n)
    return np.minimum((u * upper).astype(np.int64), upper - 1)


def ga_evolve_generation(
    pop: np.ndarray,
    fitnesses: Sequence[float],
    params: GaParams,
    rng: Rng,
) -> np.ndarray:
    """One round of elitism, tournament selection, one-point crossover and
    per-bit mutation. ``pop`` is a (population_size, length) 0/1 array."""
    pop = np.asarray(pop, dtype=np.uint8)
    fit = np.asarray(fitnesses, dtype=np.float64)
    size = params.population_size
    if pop.ndim != 2 or pop.shape[0] != size or fit.shape != (size,):
        raise SizeMismatch(
            f"population {pop.shape} / fitness {fit.shape} do not match population_size={size}"
        )
    length = pop.shape[1]
    # stable ordering: higher fitness first, lower index on ties
    order = np.lexsort((np.arange(size), -fit))
    elite_idx = np.sort(order[: params.elitism])
    n_children = size - params.elitism
    if n_children == 0:
        return pop[elite_idx].copy()

    n_pairs = (n_children + 1) // 2
    k = params.tournament_size
    entrants = _draw_indices(rng, 2 * n_pairs * k, size).reshape(2 * n_pairs, k)
    # tournament winner: best fitness, lowest index among ties
    ef = fit[entrants]
    best = ef.max(axis=1, keepdims=True)
    masked = np.where(ef == best, entrants, size)
    parents = masked.min(axis=1).reshape(n_pairs, 2)

    do_cross = rng.random_array(n_pairs) < params.crossover_prob
    cuts = 1 + _draw_indices(rng, n_pairs, max(length - 1, 1))

    children = np.empty((2 * n_pairs, length), dtype=np.uint8)
    for j in range(n_pairs):
        a, b = pop[parents[j, 0]], pop[parents[j, 1]]
        if do_cross[j] and length >= 2:
            cut = cuts[j]
            children[2 * j, :cut], children[2 * j, cut:] = a[:cut], b[cut:]
            children[2 * j + 1, :cut], children[2 * j + 1, cut:] = b[:cut], a[cut:]
        else:
            children[2 * j], children[2 * j + 1] = a, b
    children = children[:n_children]

    flips = rng.random_array(n_children * length).reshape(n_children, length)
    children ^= (flips < params.mutation_prob_per_bit).astype(np.uint8)
    return np.vstack([pop[elite_idx], children])


@dataclass
class GaResult:
    path: List[Tuple[NodeId, SimTime]]
    fitness: float
    chromosome: np.ndarray
    population: np.ndarray
    best_by_generation: List[float] = field(default_factory=list)
    # index into ``path`` of the earliest valid delivery, if any
    delivery_index: Optional[int] = None

    @property
    def delivered(self) -> bool:
        return self.fitness > 0


def ga_route(
    plan: ContactPlan,
    source: NodeId,
    t0: SimTime,
    group: GroupId,
    history: MembershipHistory,
    spec: SemanticsSpec,
    ttl: int,
    params: GaParams,
    rng: Rng,
) -> GaResult:
    size, length = params.population_size, params.length
    pop = (rng.random_array(size * length) < 0.5).astype(np.uint8).reshape(size, length)
    weights = 1 << np.arange(params.bits_per_gene - 1, -1, -1, dtype=np.int64)
    deadline = t0 + ttl
    fitness_of: Dict[bytes, float] = {}
    # walks share prefixes heavily, so feasible options and receiver checks
    # are memoised by (walk prefix, time) and (node, time)
    options: Dict[tuple, List[Tuple[SimTime, NodeId]]] = {}
    valid: Dict[Tuple[NodeId, SimTime], bool] = {}

    def is_valid(n: NodeId, t: SimTime) -> bool:
        hit = valid.get((n, t))
        if hit is None:
            hit = valid[(n, t)] = valid_receiver(spec, history, n, group, t)
        return hit

    def fitness(genes: Sequence[int]) -> float:
        # arrival times never decrease along a walk, so the first valid
        # receiver is the earliest one and the walk can stop there
        node, t = source, t0
        if is_valid(node, t):
            return delay_fitness(0)
        key: tuple = (source,)
        for g in genes:
            opts = options.get((key, t))
            if opts is None:
                opts = options[(key, t)] = plan.feasible(node, t, exclude=key)
            if not opts:
                return 0.0
            t, node = opts[g % len(opts)]
            if t > deadline:
                return 0.0
            if is_valid(node, t):
                return delay_fitness(t - t0)
            key += (node,)
        return 0.0

    def evaluate(p: np.ndarray) -> List[float]:
        genes = (p.reshape(len(p), params.genes, params.bits_per_gene).astype(np.int64) @ weights).tolist()
        out = []
        for row, g in zip(p, genes):
            k = row.tobytes()
            f = fitness_of.get(k)
            if f is None:
                f = fitness_of[k] = fitness(g)
            out.append(f)
        return out

    best_f, best_row = -1.0, None
    history_best = []
    for _ in range(params.generations):
        fits = evaluate(pop)
        i = int(np.argmax(fits))
        if fits[i] > best_f:
            best_f, best_row = fits[i], pop[i].copy()
        history_best.append(best_f)
        pop = ga_evolve_generation(pop, fits, params, rng)
    fits = evaluate(pop)
    i = int(np.argmax(fits))
    if fits[i] > best_f:
        best_f, best_row = fits[i], pop[i].copy()
    history_best.append(best_f)

    walk = decode_path(best_row, plan, source, t0, params.bits_per_gene)
    f, idx = walk_fitness(walk, t0, group, history, spec, ttl)
    return GaResult(walk, f, best_row, pop, history_best, idx)


def epidemic_forward(
    state: RouterState,
    m: Message,
    peer: NodeId,
    now: SimTime,
    peer_seen: Iterable[MessageId] = (),
) -> Decision:
    """Replicate to any peer lacking the message while it is alive."""
    if m.id in peer_seen or peer in m.path:
        return Decision.SKIP
    if message_expired(m, now):
        return Decision.SKIP
    return Decision.REPLICATE
