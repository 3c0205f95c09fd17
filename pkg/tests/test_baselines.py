import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dtn_parking.aco import AcoParams, Decision, RouterState
from dtn_parking.baselines import (
    Contact, ContactPlan, GaParams, SizeMismatch, decode_path, delay_fitness, epidemic_forward,
    ga_evolve_generation, ga_fitness, ga_route, gene_values,
)
from dtn_parking.core import Current, MessageKind, make_message
from dtn_parking.membership import MembershipHistory, history_from_events, join
from dtn_parking.rng import Rng

from helpers import brute_force_best_delay, random_plan

S, A, B = 0, 1, 2


def chromo(*genes, bits=8):
    return np.array([(g >> (bits - 1 - i)) & 1 for g in genes for i in range(bits)], dtype=np.uint8)


def test_gene_values_are_msb_first():
    assert gene_values(chromo(3, 200, 0), 8) == [3, 200, 0]


def test_decode_single_contact():
    plan = ContactPlan([Contact(S, A, 10, 20)])
    for g in (0, 1, 77):
        assert decode_path(chromo(g), plan, S, 0) == [(S, 0), (A, 10)]


def test_decode_without_contacts_stays_at_source():
    assert decode_path(chromo(5, 5), ContactPlan([Contact(A, B, 0, 5)]), S, 0) == [(S, 0)]


def test_decode_gene_selects_modulo_option_count():
    plan = ContactPlan([Contact(S, A, 5, 20), Contact(S, B, 8, 30)])
    assert decode_path(chromo(3), plan, S, 0) == [(S, 0), (B, 8)]
    assert decode_path(chromo(2), plan, S, 0) == [(S, 0), (A, 5)]


def test_decode_skips_closed_windows_and_revisits():
    plan = ContactPlan([Contact(S, A, 0, 10), Contact(A, S, 20, 30), Contact(A, B, 5, 15)])
    # from A at t=3 the only options are B (5) and S, but S is visited
    assert decode_path(chromo(0, 0, 0), plan, S, 3) == [(S, 3), (A, 3), (B, 5)]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
def test_decoded_walks_are_feasible(plan_seed, bits_seed):
    n, raw = random_plan(np.random.default_rng(plan_seed))
    plan = ContactPlan(Contact(*c) for c in raw)
    bits = np.random.default_rng(bits_seed).integers(0, 2, 64).astype(np.uint8)
    walk = decode_path(bits, plan, 0, 0)
    nodes = [w[0] for w in walk]
    assert len(set(nodes)) == len(nodes)
    for (u, tu), (v, tv) in zip(walk, walk[1:]):
        assert tv >= tu
        assert any({a, b} == {u, v} and s <= tv < e for a, b, s, e in raw)


def test_fitness_formula():
    assert delay_fitness(0) == 1000
    assert delay_fitness(1000) == 500
    h = history_from_events([join(A, 0, 0)])
    plan = ContactPlan([Contact(S, A, 1000, 2000)])
    assert ga_fitness(chromo(0), plan, S, 0, 0, h, Current(), 10_000) == 500
    assert ga_fitness(chromo(0), plan, S, 0, 1, h, Current(), 10_000) == 0
    assert ga_fitness(chromo(0), plan, S, 0, 0, h, Current(), 999) == 0  # beyond ttl


def test_identity_configuration_keeps_population():
    p = GaParams(population_size=6, crossover_prob=0, mutation_prob_per_bit=0, elitism=6, genes=2)
    pop = np.random.default_rng(1).integers(0, 2, (6, 16)).astype(np.uint8)
    out = ga_evolve_generation(pop, [3, 1, 4, 1, 5, 9], p, Rng(0))
    assert np.array_equal(out, pop)


def test_crossover_swaps_prefix_and_suffix():
    p = GaParams(population_size=3, crossover_prob=1, mutation_prob_per_bit=0, elitism=1, genes=1)
    a, b = np.zeros(8, np.uint8), np.ones(8, np.uint8)
    pop = np.vstack([a, b, b])
    children = ga_evolve_generation(pop, [1.0, 1.0, 1.0], p, Rng(3))[1:]
    for child in children:
        # every child is a prefix of one parent joined to the suffix of another
        cuts = [k for k in range(1, 8) if child[k] != child[k - 1]]
        assert len(cuts) <= 1


def test_size_mismatch():
    with pytest.raises(SizeMismatch):
        ga_evolve_generation(np.zeros((3, 8), np.uint8), [1, 2], GaParams(population_size=3, genes=1), Rng(0))


def test_elitism_upper_bound():
    with pytest.raises(ValueError):
        GaParams(population_size=4, elitism=5)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_elitism_keeps_best_fitness(seed):
    rng = np.random.default_rng(seed)
    p = GaParams(population_size=10, genes=2, mutation_prob_per_bit=0.3)
    pop = rng.integers(0, 2, (10, 16)).astype(np.uint8)
    fit = rng.random(10)
    out = ga_evolve_generation(pop, fit, p, Rng(seed))
    best = pop[int(np.argmax(fit))]
    assert any(np.array_equal(row, best) for row in out)
    assert out.shape == pop.shape


def test_ga_route_single_delivery():
    h = history_from_events([join(A, 0, 0)])
    r = ga_route(ContactPlan([Contact(S, A, 10, 20)]), S, 0, 0, h, Current(), 1000,
                 GaParams(generations=5), Rng(1))
    assert r.path == [(S, 0), (A, 10)] and r.fitness > 0 and r.delivery_index == 1


def test_ga_route_empty_plan():
    r = ga_route(ContactPlan(), S, 7, 0, MembershipHistory(), Current(), 1000, GaParams(generations=3), Rng(1))
    assert r.fitness == 0 and r.path == [(S, 7)]


def test_ga_route_is_deterministic_and_monotone():
    n, raw = random_plan(np.random.default_rng(5))
    plan = ContactPlan(Contact(*c) for c in raw)
    h = history_from_events([join(n - 1, 0, 0)])
    args = (plan, 0, 0, 0, h, Current(), 10**6, GaParams(generations=30))
    r1, r2 = ga_route(*args, Rng(9)), ga_route(*args, Rng(9))
    assert np.array_equal(r1.population, r2.population)
    assert r1.best_by_generation == r2.best_by_generation
    assert all(x <= y for x, y in zip(r1.best_by_generation, r1.best_by_generation[1:]))


@pytest.mark.slow
def test_ga_matches_enumeration_on_five_node_plan():
    rng = np.random.default_rng(11)
    while True:
        n, raw = random_plan(rng, max_nodes=5)
        if n == 5:
            h = history_from_events([join(4, 0, 0)])
            opt = brute_force_best_delay(raw, 0, 0, lambda v, t: v == 4, 8, 10**6)
            if opt is not None and opt > 0:
                break
    plan = ContactPlan(Contact(*c) for c in raw)
    hits = sum(
        ga_route(plan, 0, 0, 0, h, Current(), 10**6, GaParams(), Rng(s)).fitness == delay_fitness(opt)
        for s in range(100)
    )
    assert hits >= 90


def test_epidemic_forward_decisions():
    st_ = RouterState.for_node(0, AcoParams())
    m = make_message(MessageKind.BOOKING_ACK, 0, 0, Current(), 0, 100, 1)
    assert epidemic_forward(st_, m, 4, 0) is Decision.REPLICATE
    assert epidemic_forward(st_, m, 4, 0, peer_seen={m.id}) is Decision.SKIP
    assert epidemic_forward(st_, m, 4, 101) is Decision.SKIP
    long_path = m
    for n in range(1, 6):
        long_path = long_path.extended(n)
    assert epidemic_forward(st_, long_path, 9, 0) is Decision.REPLICATE  # no hop limit
