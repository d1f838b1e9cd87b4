"""Self-avoiding-walk trees with leaf fixing, and exhaustive marginal oracles."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Optional

from .lattice import (
    EMPTY_PINS,
    Graph,
    GenericGraph,
    LatticeRegion,
    Parity,
    Pin,
    PinError,
    PinSet,
    apply_pins,
    as_graph,
    boundary_pins,
    build_box,
    validate_pins,
)
from .rational import RationalInterval


class Boundary(enum.Enum):
    ALL_OCCUPIED = "occ"
    ALL_UNOCCUPIED = "unocc"
    FREE = "free"


class TruncationError(ValueError):
    pass


class SizeGuardError(ValueError):
    pass


@dataclass
class SawNode:
    vertex: int
    depth: int
    children: list = field(default_factory=list)
    pin: Optional[Pin] = None
    # True when the node sits at the depth cap and still has unexplored walks
    truncated: bool = False


@dataclass
class SawTree:
    root: SawNode
    depth_cap: int
    graph: GenericGraph
    model: str = "hardcore"

    def nodes(self) -> Iterator[SawNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def size(self) -> int:
        return sum(1 for _ in self.nodes())

    def is_truncated(self) -> bool:
        return any(n.truncated for n in self.nodes())


def _cycle_leaf_pin(g: GenericGraph, w: int, first: int, last: int) -> Pin:
    """Leaf rule for a walk w -> first -> ... -> last -> w."""
    order = g.order[w]
    if order.index(first) < order.index(last):
        return Pin.UNOCCUPIED
    return Pin.OCCUPIED


def build_saw_tree(
    G: Graph,
    v,
    depth_cap: Optional[int] = None,
    pins: PinSet = EMPTY_PINS,
    model: str = "hardcore",
) -> SawTree:
    """Tree of self-avoiding walks from v with leaf fixing and pins applied.

    ``model="hardcore"``: a leaf fixed unoccupied is dropped and a leaf fixed
    occupied removes its parent; pinned-occupied copies do the same.
    ``model="ising"``: fixed leaves stay in the tree carrying their pin
    (occupied reads as plus, unoccupied as minus).
    ``depth_cap=None`` builds the full tree.
    """
    g, p = as_graph(G, pins)
    if model == "hardcore":
        validate_pins(g, p)
    if isinstance(G, LatticeRegion):
        if v not in G:
            raise KeyError(f"vertex {v!r} not in region")
        v = g.labels.index(v)
    elif not (isinstance(v, int) and 0 <= v < g.n):
        raise KeyError(f"vertex {v!r} not in graph")
    if depth_cap is None:
        depth_cap = max(g.n, 1)
    if depth_cap < 1:
        raise ValueError("depth_cap must be positive")
    ising = model == "ising"
    if model not in ("hardcore", "ising"):
        raise ValueError(f"unknown model {model!r}")

    root = SawNode(v, 0)
    tree = SawTree(root, depth_cap, g, model)
    if v in p:
        root.pin = p.get(v)
        return tree

    path: list[int] = []
    pos: dict[int, int] = {}

    def expand(node: SawNode) -> list[SawNode]:
        """Fill node.children; return the unpinned children still to expand.

        Returns None when the hard-core rules force the node unoccupied.
        """
        u = node.vertex
        parent = path[-2] if len(path) > 1 else None
        at_cap = node.depth >= depth_cap
        plan = []
        for x in g.order[u]:
            if x == parent:
                continue
            if x in pos:
                leaf = _cycle_leaf_pin(g, x, path[pos[x] + 1], u)
                if ising:
                    plan.append((x, leaf))
                elif leaf is Pin.OCCUPIED:
                    return None
                continue
            pin = p.get(x)
            if pin is Pin.OCCUPIED and not ising:
                return None
            plan.append((x, pin))
        todo = []
        for x, pin in plan:
            if pin is not None:
                if not at_cap:
                    node.children.append(SawNode(x, node.depth + 1, pin=pin))
                elif ising:
                    node.truncated = True
                continue
            if at_cap:
                node.truncated = True
                continue
            child = SawNode(x, node.depth + 1)
            node.children.append(child)
            todo.append(child)
        return todo

    # explicit DFS; each frame holds a node and the children left to visit
    path.append(v)
    pos[v] = 0
    todo = expand(root)
    if todo is None:
        root.pin = Pin.UNOCCUPIED
        root.children = []
        return tree
    stack = [(root, iter(todo))]
    while stack:
        node, it = stack[-1]
        child = next(it, None)
        if child is None:
            stack.pop()
            del pos[path.pop()]
            continue
        path.append(child.vertex)
        pos[child.vertex] = len(path) - 1
        sub = expand(child)
        if sub is None:
            node.children.remove(child)
            del pos[path.pop()]
            continue
        stack.append((child, iter(sub)))
    return tree


def _postorder(root: SawNode) -> list[SawNode]:
    out, stack = [], [root]
    while stack:
        node = stack.pop()
        out.append(node)
        stack.extend(node.children)
    out.reverse()
    return out


def root_unoccupied_prob(T: SawTree, lam, boundary: Boundary = Boundary.FREE) -> Fraction:
    """Exact Pr[root unoccupied] from the one-step hard-core recursion."""
    lam = Fraction(lam)
    if boundary is Boundary.FREE and T.is_truncated():
        raise TruncationError("free boundary requested on a truncated tree")
    cap_value = Fraction(0) if boundary is Boundary.ALL_OCCUPIED else Fraction(1)
    value: dict[int, Fraction] = {}
    for node in _postorder(T.root):
        if node.pin is Pin.UNOCCUPIED:
            a = Fraction(1)
        elif node.pin is Pin.OCCUPIED:
            a = Fraction(0)
        elif node.truncated:
            a = cap_value
        else:
            prod = Fraction(1)
            for ch in node.children:
                prod *= value.pop(id(ch))
            a = 1 / (1 + lam * prod)
        value[id(node)] = a
    return value[id(T.root)]


def marginal_bracket(T: SawTree, lam) -> RationalInterval:
    """Interval spanned by the two cap boundaries (a point for a full tree)."""
    if not T.is_truncated():
        return RationalInterval.point(root_unoccupied_prob(T, lam))
    a = root_unoccupied_prob(T, lam, Boundary.ALL_OCCUPIED)
    b = root_unoccupied_prob(T, lam, Boundary.ALL_UNOCCUPIED)
    return RationalInterval(min(a, b), max(a, b))


# ------------------------------------------------------------------ oracles

MAX_BRUTE_VERTICES = 36


def independence_polynomial(g: GenericGraph) -> list[int]:
    """Coefficients a_k = number of independent sets of size k."""
    nbr = [0] * g.n
    for u, w in g.edges:
        nbr[u] |= 1 << w
        nbr[w] |= 1 << u

    @lru_cache(maxsize=None)
    def poly(mask: int) -> tuple:
        if mask == 0:
            return (1,)
        low = mask & -mask
        v = low.bit_length() - 1
        a = poly(mask & ~low)
        b = poly(mask & ~low & ~nbr[v])
        out = list(a) + [0] * max(0, len(b) + 1 - len(a))
        for k, x in enumerate(b):
            out[k + 1] += x
        return tuple(out)

    res = list(poly((1 << g.n) - 1))
    poly.cache_clear()
    return res


def evaluate_poly(coeffs, lam) -> Fraction:
    lam = Fraction(lam)
    total = Fraction(0)
    for c in reversed(coeffs):
        total = total * lam + c
    return total


def brute_force_marginal(G: Graph, v, lam, pins: PinSet = EMPTY_PINS) -> Fraction:
    """Exact Pr[v unoccupied] by summing over all consistent independent sets."""
    g, p = as_graph(G, pins)
    if g.n > MAX_BRUTE_VERTICES:
        raise SizeGuardError(f"{g.n} vertices exceeds the brute-force guard of {MAX_BRUTE_VERTICES}")
    validate_pins(g, p)
    if isinstance(G, LatticeRegion):
        v = g.labels.index(v)
    pin = p.get(v)
    if pin is not None:
        return Fraction(1) if pin is Pin.UNOCCUPIED else Fraction(0)
    lam = Fraction(lam)
    if lam == 0:
        return Fraction(1)
    z = evaluate_poly(independence_polynomial(apply_pins(g, p)), lam)
    z_unocc = evaluate_poly(independence_polynomial(apply_pins(g, p.with_pin(v, Pin.UNOCCUPIED))), lam)
    return z_unocc / z


def saw_marginal(G: Graph, v, lam, pins: PinSet = EMPTY_PINS) -> Fraction:
    """Pr[v unoccupied] from the full SAW tree."""
    return root_unoccupied_prob(build_saw_tree(G, v, None, pins), lam)


def ssm_probe(Lmax: int, lam, method: str = "transfer") -> list[tuple[int, Fraction]]:
    """Even/odd boundary gaps at the origin of build_box(L) for L = 1..Lmax.

    ``method`` picks the evaluator: ``"transfer"`` (exact frontier transfer
    matrix, scales to L around 10), ``"saw"`` (full SAW tree of the pinned
    box) or ``"brute"`` (independent-set enumeration); all are exact.
    """
    from .transfer import region_marginal

    lam = Fraction(lam)
    out = []
    for L in range(1, Lmax + 1):
        box = build_box(L)
        vals = []
        for parity in (Parity.EVEN, Parity.ODD):
            pins = boundary_pins(box, parity)
            if method == "transfer":
                vals.append(region_marginal(box, (0, 0), lam, pins))
            elif method == "saw":
                vals.append(saw_marginal(box, (0, 0), lam, pins))
            elif method == "brute":
                vals.append(brute_force_marginal(box, (0, 0), lam, pins))
            else:
                raise ValueError(f"unknown probe method {method!r}")
        out.append((L, abs(vals[0] - vals[1])))
    return out
