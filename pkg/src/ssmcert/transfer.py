"""Frontier transfer-matrix evaluation of hard-core partition functions.

Vertices are swept in a fixed order while a dictionary keyed by the
occupancy of the current frontier (processed vertices with unprocessed
neighbours) carries the accumulated weights. For a grid swept column by
column the frontier is one column, so this is the usual column transfer
matrix. Weights are kept homogeneous in integers: with lambda = p/q an
occupied vertex multiplies by p and an unoccupied one by q.
"""
from __future__ import annotations

from collections import defaultdict
from fractions import Fraction
from typing import Optional, Sequence

from .lattice import EMPTY_PINS, Graph, GenericGraph, LatticeRegion, Pin, PinSet, as_graph, validate_pins


def sweep_order(G: Graph, g: GenericGraph) -> list[int]:
    if isinstance(G, LatticeRegion):
        # column by column
        return sorted(range(g.n), key=lambda k: g.labels[k])
    return list(range(g.n))


def homogeneous_weight(g: GenericGraph, lam: Fraction, pins: PinSet, order: Sequence[int]) -> int:
    """Sum over pin-consistent independent sets of p^|occ| q^|unocc|."""
    p, q = lam.numerator, lam.denominator
    nbrs = g.order
    slot: dict[int, int] = {}
    free: list[int] = []
    done = [False] * g.n
    states: dict[int, int] = {0: 1}
    for v in order:
        block = 0
        for w in nbrs[v]:
            if w in slot:
                block |= 1 << slot[w]
        s = free.pop() if free else len(slot)
        bit = 1 << s
        slot[v] = s
        pin = pins.get(v)
        new: dict[int, int] = defaultdict(int)
        for mask, wt in states.items():
            if pin is not Pin.OCCUPIED:
                new[mask] += wt * q
            if pin is not Pin.UNOCCUPIED and not mask & block:
                new[mask | bit] += wt * p
        done[v] = True
        for x in (v, *nbrs[v]):
            if x in slot and all(done[y] for y in nbrs[x]):
                xbit = 1 << slot[x]
                merged: dict[int, int] = defaultdict(int)
                for mask, wt in new.items():
                    merged[mask & ~xbit] += wt
                new = merged
                free.append(slot.pop(x))
        states = new
    return sum(states.values())


def region_partition(G: Graph, lam, pins: PinSet = EMPTY_PINS, order: Optional[Sequence[int]] = None) -> Fraction:
    lam = Fraction(lam)
    g, p = as_graph(G, pins)
    validate_pins(g, p)
    if order is None:
        order = sweep_order(G, g)
    w = homogeneous_weight(g, lam, p, order)
    return Fraction(w, lam.denominator**g.n)


def region_marginal(G: Graph, v, lam, pins: PinSet = EMPTY_PINS) -> Fraction:
    """Exact Pr[v unoccupied | pins]."""
    lam = Fraction(lam)
    g, p = as_graph(G, pins)
    validate_pins(g, p)
    if isinstance(G, LatticeRegion):
        v = g.labels.index(v)
    pin = p.get(v)
    if pin is not None:
        return Fraction(1) if pin is Pin.UNOCCUPIED else Fraction(0)
    order = sweep_order(G, g)
    total = homogeneous_weight(g, lam, p, order)
    if total == 0:
        raise ValueError("pins admit no configuration")
    unocc = homogeneous_weight(g, lam, p.with_pin(v, Pin.UNOCCUPIED), order)
    return Fraction(unocc, total)
