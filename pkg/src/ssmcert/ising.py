"""Zero-field Ising analogue: tanh contraction certificates and small oracles."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

import numpy as np
from mpmath import iv
from mpmath.libmp import to_rational

from .branching import BranchingMatrix
from .dms import DimensionError
from .lattice import Graph, LatticeRegion, Pin, PinSet, as_graph
from .rational import RationalInterval
from .sawtree import SawTree, SizeGuardError, build_saw_tree

MAX_ISING_VERTICES = 20


@dataclass(frozen=True)
class IsingCertificate:
    tanh_beta_star: Fraction
    c: tuple

    def __post_init__(self):
        object.__setattr__(self, "tanh_beta_star", Fraction(self.tanh_beta_star))
        object.__setattr__(self, "c", tuple(Fraction(x) for x in self.c))
        if not 0 < self.tanh_beta_star < 1:
            raise ValueError("tanh(beta*) must lie strictly between 0 and 1")
        if any(x <= 0 for x in self.c):
            raise ValueError("c must be positive")


@dataclass
class IsingVerdict:
    passed: bool
    slack: list
    witness: Optional[str]
    beta_star: RationalInterval

    def __bool__(self):
        return self.passed


def atanh_interval(x, prec: int = 120) -> RationalInterval:
    """Rigorous enclosure of atanh(x) for rational 0 <= x < 1."""
    x = Fraction(x)
    if not 0 <= x < 1:
        raise ValueError("atanh needs 0 <= x < 1")
    if x == 0:
        return RationalInterval.point(0)
    p, q = x.numerator, x.denominator
    old = iv.prec
    iv.prec = prec
    try:
        y = iv.log(iv.mpf(q + p) / iv.mpf(q - p)) / 2
        a, b = y._mpi_
    finally:
        iv.prec = old
    return RationalInterval(Fraction(*to_rational(a)), Fraction(*to_rational(b)))


def check_ising(M: BranchingMatrix, cert: IsingCertificate) -> IsingVerdict:
    """Exact check of tanh(beta*) (M c)_j < c_j for every type."""
    if len(cert.c) != M.t:
        raise DimensionError(f"{len(cert.c)} weights for {M.t} types")
    tb = cert.tanh_beta_star
    slack = []
    witness = None
    for j, row in enumerate(M.entries):
        lhs = tb * sum(m * ck for m, ck in zip(row, cert.c))
        slack.append(cert.c[j] - lhs)
        if lhs >= cert.c[j] and witness is None:
            witness = f"type {j}: tanh * (M c)_j = {float(lhs):.12g} >= c_j = {float(cert.c[j]):.12g}"
    return IsingVerdict(witness is None, slack, witness, atanh_interval(tb))


def perron_certificate(M: BranchingMatrix, iters: int = 500, den: int = 10**12):
    """Collatz-Wielandt bound: returns (rho_hat, c) with M c <= rho_hat c exactly.

    Power iteration runs on the recurrent block (the root is dropped when
    nothing points at it); a tiny uniform floor keeps c positive on types
    that cannot reach the dominant class. The root weight is then set so its
    own ratio equals rho_hat.
    """
    t = M.t
    if t == 0:
        return Fraction(0), ()
    A = M.array()
    root_free = not A[:, M.root].any()
    block = [j for j in range(t) if not (root_free and j == M.root)]
    if not block:
        block = list(range(t))
    B = A[np.ix_(block, block)]
    v = np.ones(len(block))
    for _ in range(iters):
        w = B @ v
        top = w.max()
        if top <= 0:
            break
        v = w / top + 1e-9
        v /= v.max()
    c = {j: max(Fraction(float(x)).limit_denominator(den), Fraction(1, den)) for j, x in zip(block, v)}
    ratios = []
    for j in block:
        mc = sum(M.entries[j][k] * c[k] for k in block)
        ratios.append(mc / c[j])
    rho = max(ratios) if ratios else Fraction(0)
    if root_free and M.root not in c:
        mc = sum(M.entries[M.root][k] * c[k] for k in block)
        c[M.root] = mc / rho if rho > 0 and mc > 0 else Fraction(1)
    return rho, tuple(c[j] for j in range(t))


def beta_star_from_rho(rho) -> RationalInterval:
    """Enclosure of atanh(1/rho), the largest beta certified by a Perron bound rho."""
    rho = Fraction(rho)
    if rho <= 1:
        raise ValueError("needs rho > 1 for a finite beta*")
    return atanh_interval(1 / rho)


# ------------------------------------------------------------ tree recursion and oracle


def _spin_pins(pins) -> PinSet:
    if isinstance(pins, PinSet):
        return pins
    out = {}
    for v, s in (pins or {}).items():
        if s in (1, "+", Pin.OCCUPIED):
            out[v] = Pin.OCCUPIED
        elif s in (-1, "-", Pin.UNOCCUPIED):
            out[v] = Pin.UNOCCUPIED
        else:
            raise ValueError(f"bad spin {s!r}")
    return PinSet(out)


def ising_tree_ratio(T: SawTree, beta: float) -> float:
    """Pr[root is minus] from the plus/minus ratio recursion on a tree.

    A node with no information (free leaf or truncated) has ratio 1; pinned
    plus (occupied) and minus (unoccupied) nodes have ratio infinity and 0.
    """
    e2b = math.exp(2 * beta)
    theta: dict[int, float] = {}
    order, stack = [], [T.root]
    while stack:
        node = stack.pop()
        order.append(node)
        stack.extend(node.children)
    for node in reversed(order):
        if node.pin is Pin.OCCUPIED:
            val = math.inf
        elif node.pin is Pin.UNOCCUPIED:
            val = 0.0
        elif node.truncated:
            val = 1.0
        else:
            val = 1.0
            for ch in node.children:
                th = theta.pop(id(ch))
                val *= e2b if math.isinf(th) else (e2b * th + 1) / (th + e2b)
        theta[id(node)] = val
    root = theta[id(T.root)]
    return 0.0 if math.isinf(root) else 1 / (1 + root)


def ising_saw_marginal(G: Graph, v, beta: float, pins=None) -> float:
    T = build_saw_tree(G, v, None, _spin_pins(pins), model="ising")
    return ising_tree_ratio(T, beta)


def ising_brute_force_marginal(G: Graph, v, beta: float, pins: Optional[Mapping] = None) -> float:
    """Pr[sigma_v = -1] by summing exp(beta sum_{uw} sigma_u sigma_w) over all spin states."""
    ps = _spin_pins(pins)
    g, p = as_graph(G, ps)
    if isinstance(G, LatticeRegion):
        v = g.labels.index(v)
    if g.n > MAX_ISING_VERTICES:
        raise SizeGuardError(f"{g.n} vertices exceeds the Ising guard of {MAX_ISING_VERTICES}")
    fixed = {u: (1 if pin is Pin.OCCUPIED else -1) for u, pin in p.items()}
    free = [u for u in range(g.n) if u not in fixed]
    k = len(free)
    codes = np.arange(1 << k, dtype=np.int64)
    spins = np.empty((1 << k, g.n), dtype=np.int8)
    for u, s in fixed.items():
        spins[:, u] = s
    for b, u in enumerate(free):
        spins[:, u] = 2 * ((codes >> b) & 1) - 1
    energy = np.zeros(1 << k)
    for a, b in g.edges:
        energy += spins[:, a].astype(float) * spins[:, b]
    w = np.exp(beta * (energy - energy.max()))
    return float(w[spins[:, v] == -1].sum() / w.sum())
