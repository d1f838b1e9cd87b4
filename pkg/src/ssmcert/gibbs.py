"""Partition functions, SAW-tree approximate counting and Glauber dynamics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numba
import numpy as np

from .lattice import EMPTY_PINS, Graph, GenericGraph, LatticeRegion, Pin, PinSet, apply_pins, as_graph, validate_pins
from .sawtree import SizeGuardError, build_saw_tree, evaluate_poly, independence_polynomial, marginal_bracket
from .transfer import homogeneous_weight, sweep_order

RNG_NAME = "numpy.random.PCG64"
CHECK_EVERY = 1 << 16


class BracketError(ValueError):
    def __init__(self, vertex, width: float, budget: float):
        super().__init__(f"bracket at vertex {vertex!r} has log-width {width:.3e}, total budget {budget:.3e}")
        self.vertex = vertex


def brute_force_partition(G: Graph, lam, pins: PinSet = EMPTY_PINS, max_vertices: int = 36,
                          method: str = "auto") -> Fraction:
    """Exact Z = sum of lam^|sigma| over independent sets consistent with the pins.

    ``method``: "transfer" (frontier transfer matrix), "enumerate" (sum over
    all independent sets) or "auto" (transfer for regions and for graphs
    above 24 vertices).
    """
    lam = Fraction(lam)
    g, p = as_graph(G, pins)
    if g.n > max_vertices:
        raise SizeGuardError(f"{g.n} vertices exceeds the guard of {max_vertices}")
    validate_pins(g, p)
    if method == "auto":
        method = "transfer" if isinstance(G, LatticeRegion) or g.n > 24 else "enumerate"
    if method == "transfer":
        w = homogeneous_weight(g, lam, p, sweep_order(G, g))
        return Fraction(w, lam.denominator**g.n)
    if method == "enumerate":
        occ = len(p.occupied())
        return lam**occ * evaluate_poly(independence_polynomial(apply_pins(g, p)), lam)
    raise ValueError(f"unknown method {method!r}")


@dataclass
class PartitionEstimate:
    log_value: float
    relative_error_bound: float
    per_vertex_depths: list
    log_lower: float = 0.0
    log_upper: float = 0.0
    exact: Optional[Fraction] = None

    @property
    def log_width(self) -> float:
        return self.log_upper - self.log_lower


def counting_depth(n: int, eps: float, gamma_hint: float) -> int:
    return max(1, math.ceil(math.log(2 * n / eps) / math.log(1 / gamma_hint)))


def _log(x: Fraction) -> float:
    return math.log(x.numerator) - math.log(x.denominator)


def weitz_partition_estimate(G: Graph, lam, eps: float, gamma_hint: float = 0.5,
                             depth: Optional[int] = None) -> PartitionEstimate:
    """Z as a telescoping product of SAW-tree marginals with two-boundary brackets.

    Vertices are eliminated in the graph's canonical (row-major) order, each
    pinned unoccupied once its factor is computed. The error bound comes from
    the brackets alone; ``gamma_hint`` only sizes the truncation depth.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not 0 < gamma_hint < 1:
        raise ValueError("gamma_hint must lie in (0, 1)")
    lam = Fraction(lam)
    g, _ = as_graph(G)
    L = depth if depth is not None else counting_depth(max(g.n, 1), eps, gamma_hint)
    pins: dict = {}
    lo_sum = hi_sum = 0.0
    exact = Fraction(1)
    widths = []
    for v in range(g.n):
        tree = build_saw_tree(g, v, L, PinSet(pins))
        br = marginal_bracket(tree, lam)
        lo_sum += -_log(br.hi)
        hi_sum += -_log(br.lo)
        widths.append(_log(br.hi) - _log(br.lo))
        if exact is not None:
            exact = exact / br.lo if br.is_point() else None
        pins[v] = Pin.UNOCCUPIED
    total = sum(widths)
    if total > eps:
        worst = int(np.argmax(widths))
        raise BracketError(g.labels[worst], widths[worst], eps)
    mid = 0.5 * (lo_sum + hi_sum)
    bound = 0.0 if exact is not None else math.expm1(0.5 * total)
    return PartitionEstimate(mid, bound, [L] * g.n, lo_sum, hi_sum, exact)


# ------------------------------------------------------------ Glauber dynamics


@dataclass
class ChainState:
    occupancy: np.ndarray
    step_count: int
    rng_state: dict = field(repr=False)
    rng_name: str = RNG_NAME


@dataclass
class GlauberResult:
    state: ChainState
    frequencies: np.ndarray
    standard_errors: np.ndarray
    violations: int
    labels: tuple


@numba.njit(cache=True)
def _independent(occ, nbr):
    for v in range(occ.shape[0]):
        if occ[v]:
            for k in range(nbr.shape[1]):
                w = nbr[v, k]
                if w >= 0 and occ[w]:
                    return False
    return True


@numba.njit(cache=True)
def _heat_bath(occ, nbr, free, verts, unif, p_occ, t0, since, occ_time, count, check_every):
    """Run len(verts) single-site updates; returns the number of failed invariant checks."""
    bad = 0
    for k in range(verts.shape[0]):
        t = t0 + k + 1
        v = verts[k]
        if free[v]:
            blocked = False
            for m in range(nbr.shape[1]):
                w = nbr[v, m]
                if w >= 0 and occ[w]:
                    blocked = True
                    break
            new = (not blocked) and unif[k] < p_occ
            if new != occ[v]:
                if count:
                    if new:
                        since[v] = t
                    else:
                        occ_time[v] += t - since[v]
                occ[v] = new
        if t % check_every == 0:
            if not _independent(occ, nbr):
                bad += 1
    return bad


def _neighbor_table(g: GenericGraph) -> np.ndarray:
    width = max((g.degree(v) for v in range(g.n)), default=0)
    tab = -np.ones((g.n, max(width, 1)), dtype=np.int64)
    for v in range(g.n):
        for k, w in enumerate(g.neighbors(v)):
            tab[v, k] = w
    return tab


def glauber_run(G: Graph, lam, pins: PinSet = EMPTY_PINS, steps: int = 0, seed: int = 0,
                burnin: int = 0, batches: int = 50, chunk: int = 1 << 20,
                initial: Optional[ChainState] = None) -> GlauberResult:
    """Heat-bath Glauber dynamics for the hard-core model.

    Frequencies are time averages of the state after each step past
    ``burnin``; standard errors come from batch means over ``batches``
    equal blocks of that window. Passing a previous ``state`` as
    ``initial`` resumes that chain (``seed`` is then ignored).
    """
    if steps < 0 or burnin < 0:
        raise ValueError("steps and burnin must be nonnegative")
    g, p = as_graph(G, pins)
    validate_pins(g, p)
    lam = Fraction(lam)
    p_occ = float(lam / (1 + lam))
    nbr = _neighbor_table(g)
    free = np.array([v not in p for v in range(g.n)], dtype=np.bool_)
    occ = np.array([p.get(v) is Pin.OCCUPIED for v in range(g.n)], dtype=np.bool_)
    rng = np.random.Generator(np.random.PCG64(seed))
    t = 0
    if initial is not None:
        if initial.rng_name != RNG_NAME or initial.occupancy.shape != (g.n,):
            raise ValueError("chain state does not belong to this generator and graph")
        occ = initial.occupancy.astype(np.bool_).copy()
        rng.bit_generator.state = initial.rng_state
        t = initial.step_count
    since = np.zeros(g.n, dtype=np.int64)
    occ_time = np.zeros(g.n, dtype=np.int64)
    violations = 0

    def advance(n_steps: int, count: bool):
        nonlocal t, violations
        done = 0
        while done < n_steps and g.n:
            k = min(chunk, n_steps - done)
            # one double per step gives both the site and the coin, so the
            # trajectory does not depend on how the run is split into chunks
            scaled = rng.random(k) * g.n
            verts = scaled.astype(np.int64)
            unif = scaled - verts
            violations += _heat_bath(occ, nbr, free, verts, unif, p_occ, t, since, occ_time, count, CHECK_EVERY)
            t += k
            done += k
        if not g.n:
            t += n_steps

    burnin = min(burnin, steps)
    advance(burnin, False)
    window = steps - burnin
    nb = max(1, min(batches, window)) if window else 1
    edges = np.linspace(0, window, nb + 1).astype(np.int64)
    batch_freq = np.zeros((nb, g.n))
    for b in range(nb):
        length = int(edges[b + 1] - edges[b])
        occ_time[:] = 0
        since[:] = t
        advance(length, True)
        occ_time[occ] += t - since[occ]
        if length:
            batch_freq[b] = occ_time / length
    if not _independent(occ, nbr):
        violations += 1
    if window:
        weights = np.diff(edges) / window
        freq = weights @ batch_freq
        se = batch_freq.std(axis=0, ddof=1) / math.sqrt(nb) if nb > 1 else np.full(g.n, np.inf)
    else:
        freq = np.zeros(g.n)
        se = np.full(g.n, np.inf)
    state = ChainState(occ.copy(), t, rng.bit_generator.state)
    return GlauberResult(state, freq, se, violations, g.labels)


def exact_occupation(G: Graph, lam, pins: PinSet = EMPTY_PINS) -> np.ndarray:
    """Exact Pr[v occupied] for every vertex, from the transfer matrix."""
    from .transfer import region_marginal

    g, p = as_graph(G, pins)
    return np.array([float(1 - region_marginal(g, v, lam, p)) for v in range(g.n)])
