"""Tests for scheme construction: rate rationalization, extension-field
sizing, randomized coding-matrix design, the exact decodability check and
its agreement with end-to-end simulation, the multicast graph view, and
scheme serialization."""

import dataclasses
import json
import random
from fractions import Fraction

import networkx as nx
import pytest

from datex.gf import Matrix, make_field
from datex.greedy import Instance, feasible_in_region
from datex.netcode import (DesignFailureError, InfeasibleRatesError,
                           TransmissionScheme, build_multicast_graph,
                           design_transmissions, graph_to_dot,
                           min_extension_degree, rationalize,
                           scheme_core_from_dict, scheme_core_to_dict,
                           simulate_exchange, verify_decodability)
from datex.oracle import build_lp, solve_exact
from datex.source import TabularSource, raw_source, tabulate
from helpers import (example2_instance, example3_instance,
                     random_linear_instance)

F0 = Fraction(0)


# ---------------------------------------------------------------------------
# Rationalization
# ---------------------------------------------------------------------------

def test_rationalize_worked_example():
    rates = (Fraction(1, 4),) * 3 + (Fraction(1, 2),) * 3
    assert rationalize(rates) == (4, (1, 1, 1, 2, 2, 2))


def test_rationalize_integers_unchanged():
    assert rationalize((0, 1, 1)) == (1, (0, 1, 1))
    assert rationalize((3, 0)) == (1, (3, 0))


def test_rationalize_lcm():
    assert rationalize((Fraction(1, 3), Fraction(1, 6))) == (6, (2, 1))


def test_rationalize_snaps_solver_noise(example2):
    noisy = [0.2500000001, 0.25, 0.2499999999, 0.5000000002, 0.5, 0.5]
    assert rationalize(noisy, instance=example2) == (4, (1, 1, 1, 2, 2, 2))


def test_rationalize_repairs_snap_breakage(example2):
    # 0.4 everywhere is feasible, but snapping to whole numbers zeroes it
    # out; each terminal in turn absorbs the worst remaining deficit
    L, chunks = rationalize([Fraction(2, 5)] * 6, max_denominator=1,
                            instance=example2)
    assert (L, chunks) == (1, (2, 2, 1, 0, 0, 0))
    rates = [Fraction(c) for c in chunks]
    for l in example2.user_list:
        assert feasible_in_region(rates, example2, l)


def test_rationalize_rejects_infeasible_input(example2):
    # a deficit far beyond snapping noise means the request itself is bad
    with pytest.raises(InfeasibleRatesError):
        rationalize([0] * 6, instance=example2)
    start = [Fraction(1, 4), F0, F0, Fraction(1, 2), F0, Fraction(1, 2)]
    with pytest.raises(InfeasibleRatesError):
        rationalize(start, instance=example2)


def test_rationalize_validation(example2):
    with pytest.raises(ValueError):
        rationalize((Fraction(1, 3), Fraction(1, 64)))  # lcm 192 > 64
    with pytest.raises(ValueError):
        rationalize((1,), max_denominator=0)
    with pytest.raises(ValueError):
        rationalize((-Fraction(1, 2),))
    with pytest.raises(ValueError):
        rationalize([0] * 5, instance=example2)  # length mismatch
    model = example3_instance().model
    restricted = Instance(model, [0], transmitters=[1, 2])
    with pytest.raises(ValueError):
        rationalize((1, 1, 1), instance=restricted)  # silent terminal rated


# ---------------------------------------------------------------------------
# Extension-field sizing
# ---------------------------------------------------------------------------

def test_min_extension_degree():
    gf2 = make_field(2)
    assert min_extension_degree(gf2, 2, 4, 1) == 5    # need > 16
    assert min_extension_degree(gf2, 1, 1, 1) == 2    # need > 2: 2 is not
    assert min_extension_degree(make_field(3), 3, 3, 4) == 4   # 81 > 72
    assert min_extension_degree(make_field(2, 8), 3, 3, 4) == 1


# ---------------------------------------------------------------------------
# Hand-built schemes on the two-user packet example
# ---------------------------------------------------------------------------

def _hand_scheme(helper_row):
    """User 1 forwards its third observed packet; the helper sends the
    combination given by helper_row over its two observed packets."""
    inst = example3_instance()
    F = make_field(2)
    mats = {
        1: Matrix.from_rows(F, [[0, 0, 1]], ncols=3),
        2: Matrix.from_rows(F, [helper_row], ncols=2),
    }
    return inst, TransmissionScheme(inst, 1, (0, 1, 1), 1, F, mats)


def test_hand_scheme_decodes():
    _, scheme = _hand_scheme([1, 1])  # sum of the helper's two packets
    report = verify_decodability(scheme)
    assert report.ok
    assert report.target_rank == 4
    assert report.deficits == {0: 0, 1: 0}
    assert report.per_user == {0: True, 1: True}
    for seed in range(5):
        assert simulate_exchange(scheme, seed=seed).ok


def test_hand_scheme_deficient_helper():
    # sending only the first packet starves user 1 of the second one
    _, scheme = _hand_scheme([1, 0])
    report = verify_decodability(scheme)
    assert not report.ok
    assert report.deficits == {0: 0, 1: 1}
    assert report.per_user == {0: True, 1: False}
    for seed in range(5):
        result = simulate_exchange(scheme, seed=seed)
        assert result.successes == {0: True, 1: False}
        assert not result.ok


def test_zero_rate_terminal_never_blocks():
    # user 0 sends nothing at all and still everything decodes
    _, scheme = _hand_scheme([1, 1])
    assert 0 not in scheme.matrices
    assert scheme.total_symbols == 2
    assert verify_decodability(scheme).ok


# ---------------------------------------------------------------------------
# Randomized design
# ---------------------------------------------------------------------------

def test_design_two_user_example(example3):
    scheme = design_transmissions(example3, (0, 1, 1), 1, seed=0)
    assert scheme.ext_degree == 5           # smallest power of 2 above 16
    assert scheme.coding_field.q == 32
    assert scheme.chunk_rates == (0, 1, 1)
    assert verify_decodability(scheme).ok
    for seed in range(10):
        assert simulate_exchange(scheme, seed=seed).ok


def test_design_is_deterministic(example3):
    a = design_transmissions(example3, (0, 1, 1), 1, seed=7)
    b = design_transmissions(example3, (0, 1, 1), 1, seed=7)
    assert a == b
    c = design_transmissions(example3, (0, 1, 1), 1, seed=8)
    assert c.matrices != a.matrices


def test_design_three_user_example_small_extension(example2):
    # a quadratic extension of the ternary field is already enough here
    scheme = design_transmissions(example2, (1, 1, 1, 2, 2, 2), 4,
                                  ext_degree=2, seed=0)
    assert scheme.coding_field.q == 9
    assert scheme.L == 4
    assert scheme.total_symbols == 9
    assert verify_decodability(scheme).ok
    assert simulate_exchange(scheme, seed=3).ok


def test_design_retry_budget(example3):
    # over the bare binary field a single random attempt usually misses...
    with pytest.raises(DesignFailureError):
        design_transmissions(example3, (0, 1, 1), 1, ext_degree=1,
                             seed=0, max_attempts=1)
    # ...but verified binary schemes exist and the search can find one
    scheme = design_transmissions(example3, (0, 1, 1), 1, ext_degree=1,
                                  seed=16, max_attempts=1)
    assert scheme.coding_field.q == 2
    assert verify_decodability(scheme).ok


def test_design_validation(example3):
    with pytest.raises(ValueError):
        design_transmissions(example3, (0, 1, 1), 0)
    with pytest.raises(ValueError):
        design_transmissions(example3, (0, -1, 1), 1)
    with pytest.raises(ValueError):
        design_transmissions(example3, (0, 1), 1)
    with pytest.raises(InfeasibleRatesError):
        design_transmissions(example3, (0, 0, 1), 1)
    restricted = Instance(example3.model, [0], transmitters=[1, 2])
    with pytest.raises(ValueError):
        design_transmissions(restricted, (1, 1, 1), 1)


def test_design_rejects_tabular_models(example2):
    table = tabulate(example2.model)
    inst = Instance(TabularSource(table.values), [0, 1, 2])
    with pytest.raises(TypeError):
        design_transmissions(inst, (1, 1, 1, 2, 2, 2), 4)
    with pytest.raises(TypeError):
        build_multicast_graph(inst, (1, 1, 1, 2, 2, 2), 4)


# ---------------------------------------------------------------------------
# Decodability check == simulation outcome, scheme by scheme
# ---------------------------------------------------------------------------

def _random_complete_instance(rng):
    """Random instance whose terminals collectively determine every packet
    (the setting in which a full exchange is possible at all)."""
    while True:
        inst = random_linear_instance(rng, multi_user=rng.random() < 0.5)
        model = inst.model
        if model.joint_entropy(model.full_mask) == model.N:
            return inst


def test_verification_predicts_simulation():
    rng = random.Random(1661)
    for _ in range(8):
        inst = _random_complete_instance(rng)
        opt = solve_exact(build_lp(inst))
        L, chunks = rationalize(opt.rates, instance=inst)
        scheme = design_transmissions(inst, chunks, L,
                                      seed=rng.randrange(10 ** 6))
        assert verify_decodability(scheme).ok
        for seed in (0, 1):
            assert simulate_exchange(scheme, seed=seed).ok
        # sabotage one transmitting terminal: zero out its coding matrix
        if not scheme.matrices:
            continue
        victim = rng.choice(sorted(scheme.matrices))
        old = scheme.matrices[victim]
        zero = Matrix(scheme.coding_field, old.nrows, old.ncols,
                      [0] * (old.nrows * old.ncols), validate=False)
        mutated = dataclasses.replace(
            scheme, matrices={**scheme.matrices, victim: zero})
        report = verify_decodability(mutated)
        for seed in (0, 1):
            assert simulate_exchange(mutated, seed=seed).successes \
                == report.per_user


def test_designed_rates_feasible_on_chunked_model(example2):
    L, chunks = rationalize((Fraction(1, 4),) * 3 + (Fraction(1, 2),) * 3,
                            instance=example2)
    rates = [Fraction(c, L) for c in chunks]
    for l in example2.user_list:
        assert feasible_in_region(rates, example2, l)


# ---------------------------------------------------------------------------
# Multicast graph
# ---------------------------------------------------------------------------

def test_graph_three_user_example(example2):
    g = build_multicast_graph(example2, (1, 1, 1, 2, 2, 2), 4)
    assert g.source == "S"
    assert g.receivers == ("r0", "r1", "r2")
    assert g.total_chunks == 12
    caps = {(u, v): c for u, v, c in g.edges}
    assert caps[("S", "s0")] == 4       # one observed row, four chunks
    assert caps[("s0", "r0")] == 4      # users tap their own side info
    assert caps[("s3", "t3")] == 2      # helper relays its broadcast
    assert caps[("t3", "r0")] == 2
    assert caps[("t0", "r1")] == 1
    assert ("t0", "r0") not in caps     # no self-loop through the relay
    assert ("s3", "r3") not in caps     # helpers have no receiver


def test_graph_min_cut_carries_all_chunks(example2):
    g = build_multicast_graph(example2, (1, 1, 1, 2, 2, 2), 4)
    G = nx.DiGraph()
    for u, v, c in g.edges:
        G.add_edge(u, v, capacity=c)
    flows = {r: nx.maximum_flow_value(G, "S", r) for r in g.receivers}
    assert flows["r0"] == 12            # tight for the first receiver
    assert all(f >= g.total_chunks for f in flows.values())


def test_graph_min_cut_on_random_instances():
    rng = random.Random(515)
    for _ in range(6):
        inst = _random_complete_instance(rng)
        opt = solve_exact(build_lp(inst))
        L, chunks = rationalize(opt.rates, instance=inst)
        g = build_multicast_graph(inst, chunks, L)
        G = nx.DiGraph()
        for u, v, c in g.edges:
            G.add_edge(u, v, capacity=c)
        for r in g.receivers:
            assert nx.maximum_flow_value(G, "S", r) >= g.total_chunks


def test_graph_zero_rate_relay_edges(example3):
    g = build_multicast_graph(example3, (0, 1, 1), 1)
    caps = {(u, v): c for u, v, c in g.edges}
    assert caps[("s0", "t0")] == 0
    assert caps[("t0", "r1")] == 0
    assert caps[("s2", "t2")] == 1


def test_graph_single_user_shape():
    model = raw_source([[0], [1]], 2)
    inst = Instance(model, [0])
    g = build_multicast_graph(inst, (0, 1), 1)
    assert g.nodes == ("S", "s0", "s1", "t0", "t1", "r0")
    assert g.receivers == ("r0",)


def test_graph_validation(example2):
    with pytest.raises(ValueError):
        build_multicast_graph(example2, (1, 1), 4)


def test_graph_to_dot(example3):
    g = build_multicast_graph(example3, (0, 1, 1), 1)
    dot = graph_to_dot(g)
    assert dot.startswith("digraph")
    assert 'S [shape=doublecircle];' in dot
    assert 'r0 [shape=box];' in dot
    assert 's2 [shape=circle];' in dot
    assert 'S -> s0 [label="2"];' in dot    # two owned packets, one chunk
    assert 't2 -> r0 [label="1"];' in dot
    assert dot.endswith("}")


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def test_scheme_round_trip(example3):
    scheme = design_transmissions(example3, (0, 1, 1), 1, seed=3)
    data = json.loads(json.dumps(scheme_core_to_dict(scheme)))
    back = scheme_core_from_dict(data, example3)
    assert back == scheme


def test_scheme_round_trip_chunked(example2):
    scheme = design_transmissions(example2, (1, 1, 1, 2, 2, 2), 4,
                                  ext_degree=2, seed=0)
    back = scheme_core_from_dict(scheme_core_to_dict(scheme), example2)
    assert back == scheme
    assert verify_decodability(back).ok


def test_scheme_from_dict_validation(example3):
    scheme = design_transmissions(example3, (0, 1, 1), 1, seed=3)
    data = scheme_core_to_dict(scheme)
    wrong_field = {**data, "coding_field": {"characteristic": 2, "degree": 4}}
    with pytest.raises(ValueError):
        scheme_core_from_dict(wrong_field, example3)
    wrong_rows = {**data, "chunk_rates": [0, 2, 1]}
    with pytest.raises(ValueError):
        scheme_core_from_dict(wrong_rows, example3)
