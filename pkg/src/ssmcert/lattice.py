"""Finite pieces of Z^2, small generic graphs, and boundary pin bookkeeping."""
from __future__ import annotations

import enum
from functools import cached_property
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Mapping, Sequence, Union

# Directions in decreasing rank: N > E > S > W.
DIRECTIONS = "NESW"
STEP = {"N": (0, 1), "E": (1, 0), "S": (0, -1), "W": (-1, 0)}
OPPOSITE = {"N": "S", "S": "N", "E": "W", "W": "E"}


class Pin(enum.Enum):
    OCCUPIED = "occ"
    UNOCCUPIED = "unocc"


class Parity(enum.Enum):
    EVEN = 0
    ODD = 1


class PinError(ValueError):
    pass


@dataclass(frozen=True)
class PinSet:
    """Vertex -> Pin assignment. Vertices are coordinates for regions and indices for graphs."""

    assignments: Mapping[Hashable, Pin] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "assignments", dict(self.assignments))

    def __len__(self):
        return len(self.assignments)

    def __iter__(self):
        return iter(self.assignments)

    def __contains__(self, v):
        return v in self.assignments

    def get(self, v, default=None):
        return self.assignments.get(v, default)

    def items(self):
        return self.assignments.items()

    def occupied(self) -> list:
        return [v for v, p in self.assignments.items() if p is Pin.OCCUPIED]

    def unoccupied(self) -> list:
        return [v for v, p in self.assignments.items() if p is Pin.UNOCCUPIED]

    def union(self, other: "PinSet") -> "PinSet":
        clash = set(self.assignments) & set(other.assignments)
        if any(self.assignments[v] is not other.assignments[v] for v in clash):
            raise PinError("conflicting pins on a shared vertex")
        return PinSet({**self.assignments, **other.assignments})

    def with_pin(self, v, pin: Pin) -> "PinSet":
        return self.union(PinSet({v: pin}))


EMPTY_PINS = PinSet()


@dataclass(frozen=True)
class GenericGraph:
    """Simple undirected graph on vertices 0..n-1.

    ``order[v]`` lists the neighbours of v from largest to smallest in the
    per-vertex ordering used by the SAW tree leaf rule. ``labels`` maps each
    vertex back to whatever it represented before relabelling.
    """

    n: int
    edges: tuple
    order: tuple
    labels: tuple

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]], order=None, labels=None):
        seen = set()
        adj: list[list[int]] = [[] for _ in range(n)]
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"parallel edge {key}")
            seen.add(key)
            adj[u].append(v)
            adj[v].append(u)
        if order is None:
            order = [sorted(a) for a in adj]
        else:
            order = [list(o) for o in order]
            for v in range(n):
                if sorted(order[v]) != sorted(adj[v]):
                    raise ValueError(f"neighbour order of {v} does not match its edges")
        if labels is None:
            labels = tuple(range(n))
        return cls(n, tuple(sorted(seen)), tuple(tuple(o) for o in order), tuple(labels))

    def neighbors(self, v: int) -> tuple:
        return self.order[v]

    def degree(self, v: int) -> int:
        return len(self.order[v])

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.order[u]

    def index_of(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"vertex {label!r} not in graph") from None


@dataclass(frozen=True)
class LatticeRegion:
    """Finite induced subgraph of Z^2.

    ``vertices`` is kept in canonical row-major order (by j, then i).
    ``direction_order`` gives the per-vertex ranking of directions, largest
    first; vertices missing from it use N > E > S > W.
    """

    vertices: tuple
    direction_order: Mapping = field(default_factory=dict)

    def __post_init__(self):
        vs = sorted({(int(i), int(j)) for i, j in self.vertices}, key=lambda p: (p[1], p[0]))
        if len(vs) != len(self.vertices):
            raise ValueError("duplicate vertices in region")
        object.__setattr__(self, "vertices", tuple(vs))
        dord = dict(self.direction_order)
        for v, o in dord.items():
            if sorted(o) != sorted(DIRECTIONS):
                raise ValueError(f"direction order at {v} must rank all four directions")
        object.__setattr__(self, "direction_order", dord)

    def __contains__(self, v) -> bool:
        return v in self._vertex_set

    @cached_property
    def _vertex_set(self) -> frozenset:
        return frozenset(self.vertices)

    def directions_at(self, v) -> str:
        return "".join(self.direction_order.get(v, DIRECTIONS))

    def neighbors(self, v) -> list:
        """Neighbours of v in ranking order, largest first."""
        vs = self._vertex_set
        out = []
        for d in self.directions_at(v):
            dx, dy = STEP[d]
            w = (v[0] + dx, v[1] + dy)
            if w in vs:
                out.append(w)
        return out

    def edges(self) -> list:
        vs = self._vertex_set
        out = []
        for i, j in self.vertices:
            for w in ((i + 1, j), (i, j + 1)):
                if w in vs:
                    out.append(((i, j), w))
        return out

    def to_graph(self) -> GenericGraph:
        index = {v: k for k, v in enumerate(self.vertices)}
        edges = [(index[u], index[w]) for u, w in self.edges()]
        order = [[index[w] for w in self.neighbors(v)] for v in self.vertices]
        return GenericGraph.from_edges(len(self.vertices), edges, order, self.vertices)


Graph = Union[LatticeRegion, GenericGraph]


def build_box(L: int) -> LatticeRegion:
    if L < 0:
        raise ValueError("box radius must be nonnegative")
    return LatticeRegion(tuple((i, j) for j in range(-L, L + 1) for i in range(-L, L + 1)))


def box_radius(G: LatticeRegion) -> int:
    L = max(max(abs(i), abs(j)) for i, j in G.vertices)
    if len(G.vertices) != (2 * L + 1) ** 2:
        raise ValueError("region is not a full box")
    return L


def boundary_pins(G: LatticeRegion, parity: Parity) -> PinSet:
    L = box_radius(G)
    pins = {}
    for i, j in G.vertices:
        if max(abs(i), abs(j)) == L:
            same = (i + j) % 2 == parity.value
            pins[(i, j)] = Pin.OCCUPIED if same else Pin.UNOCCUPIED
    return PinSet(pins)


def as_graph(G: Graph, pins: PinSet = EMPTY_PINS) -> tuple[GenericGraph, PinSet]:
    """Return the graph form of G with pins re-keyed to vertex indices."""
    if isinstance(G, GenericGraph):
        return G, pins
    g = G.to_graph()
    index = {v: k for k, v in enumerate(g.labels)}
    try:
        return g, PinSet({index[v]: p for v, p in pins.items()})
    except KeyError as exc:
        raise PinError(f"pinned vertex {exc.args[0]} not in region") from None


def validate_pins(g: GenericGraph, pins: PinSet) -> None:
    for v, p in pins.items():
        if not (isinstance(v, int) and 0 <= v < g.n):
            raise PinError(f"pinned vertex {v!r} not in graph")
        if not isinstance(p, Pin):
            raise PinError(f"bad pin value {p!r}")
    occ = set(pins.occupied())
    for u in occ:
        for w in g.neighbors(u):
            if w in occ:
                raise PinError(f"adjacent occupied pins at {g.labels[u]} and {g.labels[w]}")


def apply_pins(G: Graph, pins: PinSet) -> GenericGraph:
    """Delete unoccupied pins and occupied pins with their neighbours.

    The surviving vertices keep their relative order and neighbour ranking;
    ``labels`` of the result point back to the labels of G.
    """
    g, p = as_graph(G, pins)
    validate_pins(g, p)
    dead = set(p)
    for u in p.occupied():
        dead.update(g.neighbors(u))
    keep = [v for v in range(g.n) if v not in dead]
    new = {v: k for k, v in enumerate(keep)}
    edges = [(new[u], new[v]) for u, v in g.edges if u in new and v in new]
    order = [[new[w] for w in g.neighbors(v) if w in new] for v in keep]
    return GenericGraph.from_edges(len(keep), edges, order, [g.labels[v] for v in keep])


# ---------------------------------------------------------------- file formats


def _lines(path) -> list[str]:
    text = Path(path).read_text()
    return [ln.split("#", 1)[0].strip() for ln in text.splitlines() if ln.split("#", 1)[0].strip()]


def read_region(path) -> LatticeRegion:
    lines = _lines(path)
    head = lines[0].split()
    if head[0] != "region" or len(head) != 2:
        raise ValueError("region file must start with 'region <count>'")
    count = int(head[1])
    pts = [tuple(int(x) for x in ln.split()) for ln in lines[1:]]
    if len(pts) != count or any(len(p) != 2 for p in pts):
        raise ValueError(f"expected {count} 'i j' lines")
    return LatticeRegion(tuple(pts))


def write_region(G: LatticeRegion, path) -> None:
    body = "".join(f"{i} {j}\n" for i, j in G.vertices)
    Path(path).write_text(f"region {len(G.vertices)}\n{body}")


def read_pins(path) -> PinSet:
    """Pins as ``i j occ|unocc`` (regions) or ``v occ|unocc`` (graphs)."""
    pins = {}
    for ln in _lines(path):
        parts = ln.split()
        pin = Pin(parts[-1])
        coords = tuple(int(x) for x in parts[:-1])
        key = coords[0] if len(coords) == 1 else coords
        if len(coords) not in (1, 2):
            raise ValueError(f"bad pin line {ln!r}")
        pins[key] = pin
    return PinSet(pins)


def write_pins(pins: PinSet, path) -> None:
    out = []
    for v, p in pins.items():
        coords = " ".join(str(x) for x in v) if isinstance(v, tuple) else str(v)
        out.append(f"{coords} {p.value}\n")
    Path(path).write_text("".join(out))


def read_graph(path) -> GenericGraph:
    lines = _lines(path)
    head = lines[0].split()
    if head[0] != "graph" or len(head) != 3:
        raise ValueError("graph file must start with 'graph <n> <m>'")
    n, m = int(head[1]), int(head[2])
    edges = [tuple(int(x) for x in ln.split()) for ln in lines[1 : 1 + m]]
    order = None
    rest = lines[1 + m :]
    if rest:
        given = {}
        for ln in rest:
            if not ln.startswith("order"):
                raise ValueError(f"unexpected line {ln!r}")
            key, vals = ln[len("order") :].split(":", 1)
            given[int(key)] = [int(x) for x in vals.split()]
        base = GenericGraph.from_edges(n, edges)
        order = [given.get(v, list(base.order[v])) for v in range(n)]
    return GenericGraph.from_edges(n, edges, order)


def write_graph(g: GenericGraph, path) -> None:
    out = [f"graph {g.n} {len(g.edges)}\n"]
    out += [f"{u} {v}\n" for u, v in g.edges]
    out += [f"order {v}: {' '.join(map(str, g.order[v]))}\n" for v in range(g.n)]
    Path(path).write_text("".join(out))
