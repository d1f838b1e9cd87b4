import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import graphs, valid_pins
from ssmcert.gibbs import (
    BracketError,
    brute_force_partition,
    exact_occupation,
    glauber_run,
    weitz_partition_estimate,
)
from ssmcert.lattice import GenericGraph, LatticeRegion, Pin, PinSet, build_box
from ssmcert.sawtree import SizeGuardError

EDGE = GenericGraph.from_edges(2, [(0, 1)])
VERTEX = GenericGraph.from_edges(1, [])


def square(k: int) -> LatticeRegion:
    return LatticeRegion(tuple((i, j) for i in range(k) for j in range(k)))


def test_partition_examples():
    assert brute_force_partition(EDGE, 1) == 3
    cycle = GenericGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    assert brute_force_partition(cycle, 1) == 7
    G = build_box(1)
    assert brute_force_partition(G, 1, method="transfer") == brute_force_partition(G, 1, method="enumerate") == 63
    assert brute_force_partition(square(4), 1) == 1234
    assert brute_force_partition(EDGE, 2, PinSet({0: Pin.OCCUPIED})) == 2


@settings(max_examples=60, deadline=None)
@given(st.data(), st.sampled_from([Fraction(1, 2), Fraction(1), Fraction(7, 3)]))
def test_transfer_matches_enumeration(data, lam):
    g = data.draw(graphs(max_n=11, max_p=0.5))
    pins = data.draw(valid_pins(g))
    assert brute_force_partition(g, lam, pins, method="transfer") == brute_force_partition(
        g, lam, pins, method="enumerate")


def test_size_guard():
    with pytest.raises(SizeGuardError):
        brute_force_partition(build_box(3), 1, max_vertices=36)


def test_weitz_single_vertex_is_exact():
    est = weitz_partition_estimate(VERTEX, Fraction(5, 2), 1e-9)
    assert est.exact == Fraction(7, 2)
    assert est.relative_error_bound == 0


@pytest.mark.parametrize("k,Z", [(3, 63), (4, 1234)])
def test_weitz_small_boxes(k, Z):
    est = weitz_partition_estimate(square(k), 1, 1e-6)
    assert est.log_width <= 1e-6
    assert est.log_lower - 1e-12 <= math.log(Z) <= est.log_upper + 1e-12
    assert abs(est.log_value - math.log(Z)) <= 1e-6


def test_weitz_reports_the_worst_bracket():
    with pytest.raises(BracketError) as info:
        weitz_partition_estimate(square(5), 1, 1e-6, depth=4)
    assert info.value.vertex in square(5).vertices


@pytest.mark.slow
def test_weitz_six_by_six_brackets_itself():
    est = weitz_partition_estimate(square(6), 1, 1e-3)
    assert est.log_width <= 1e-3
    # the transfer matrix still reaches 36 vertices, so use it as a check
    Z = brute_force_partition(square(6), 1)
    assert est.log_lower <= math.log(Z) <= est.log_upper


def test_glauber_single_vertex_and_edge():
    r = glauber_run(VERTEX, 1, steps=10**6, seed=1)
    assert abs(r.frequencies[0] - 0.5) < 0.01
    r = glauber_run(EDGE, 1, steps=10**6, seed=2, burnin=1000)
    assert np.all(np.abs(r.frequencies - 1 / 3) < 0.01)
    assert r.violations == 0


def test_glauber_is_deterministic_and_resumable():
    G = build_box(1)
    a = glauber_run(G, 2, steps=50_000, seed=7)
    b = glauber_run(G, 2, steps=50_000, seed=7)
    assert np.array_equal(a.frequencies, b.frequencies)
    assert np.array_equal(a.state.occupancy, b.state.occupancy)
    half = glauber_run(G, 2, steps=25_000, seed=7)
    rest = glauber_run(G, 2, steps=25_000, initial=half.state)
    assert np.array_equal(rest.state.occupancy, a.state.occupancy)
    assert rest.state.step_count == 50_000


def test_glauber_respects_pins():
    G = build_box(1)
    pins = PinSet({(0, 0): Pin.OCCUPIED, (1, 1): Pin.UNOCCUPIED})
    r = glauber_run(G, 1, pins, steps=200_000, seed=3)
    freq = dict(zip(r.labels, r.frequencies))
    assert freq[(0, 0)] == pytest.approx(1) and freq[(1, 1)] == 0
    assert freq[(1, 0)] == freq[(0, 1)] == 0
    exact = dict(zip(r.labels, exact_occupation(G, 1, pins)))
    assert abs(freq[(-1, -1)] - exact[(-1, -1)]) < 0.01


def test_edge_chain_detailed_balance():
    # heat bath on an edge: each move from or to the empty state has probability 1/4 at lambda = 1
    state = glauber_run(EDGE, 1, steps=0, seed=11).state
    moves = {"empty->0": 0, "0->empty": 0}
    visits = {"empty": 0, "0": 0}
    for _ in range(8_000):
        before = tuple(state.occupancy)
        state = glauber_run(EDGE, 1, steps=1, initial=state).state
        after = tuple(state.occupancy)
        if before == (False, False):
            visits["empty"] += 1
            moves["empty->0"] += after == (True, False)
        elif before == (True, False):
            visits["0"] += 1
            moves["0->empty"] += after == (False, False)
    p_out = moves["empty->0"] / visits["empty"]
    p_back = moves["0->empty"] / visits["0"]
    assert abs(p_out - 0.25) < 0.035 and abs(p_back - 0.25) < 0.035
    # stationary mass is uniform, so balanced flow means equal rates
    assert abs(p_out - p_back) < 0.05
